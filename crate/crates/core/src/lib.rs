//! Boundary-aware mask geometry for coarse-to-fine instance segmentation.
//!
//! * [`mask`]: binary / score grids, 2x bilinear upsampling, RoI crop-resize, IoU.
//! * [`boundary`]: contours, exact and convolution-approximated boundary regions.
//! * [`refine`]: training regions, region-restricted BCE, stage composition.
//! * [`metrics`]: boundary F1, boundary / non-boundary accuracy, corpus evaluation.
//! * [`io`], [`synth`], [`cli`]: RLE scene files, synthetic corpora, command line.

pub mod boundary;
pub mod cli;
pub mod error;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod refine;
pub mod synth;

pub use boundary::{
    boundary, boundary_agreement, boundary_approx, boundary_batch, boundary_exact, contour,
    make_kernel, BoundaryKernel, BoundaryMethod, BoundaryParams,
};
pub use error::{Error, Result};
pub use mask::{
    binarize, crop_resize_gt, mask_iou, upsample2x_bilinear, upsample2x_binary, BBox, BinaryMask,
    ProbMask,
};
pub use metrics::{
    boundary_f1, evaluate_corpus, match_instances, region_accuracies, EvalConfig, EvalReport,
    MatchedPair, RegionAccuracy,
};
pub use refine::{
    aggregate_losses, compose_stage, oracle_stage_predictor, region_bce_loss, run_pipeline,
    training_region, LossWeights, StageState,
};
