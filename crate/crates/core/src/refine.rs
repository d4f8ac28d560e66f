//! Multi-stage refinement: training regions, the region-restricted loss, stage
//! loss aggregation and the coarse-to-fine inference composition.
//!
//! Stage `k` works on a `14 * 2^k` square grid (28, 56, 112, and 224 for an
//! optional fourth stage).

use crate::boundary::{boundary, BoundaryParams};
use crate::error::{Error, Result};
use crate::mask::{
    area_downsample, binarize, crop_resize_gt, ensure_same_dims, paste_into_image,
    upsample2x_binary, BBox, BinaryMask, ProbMask, DEFAULT_THRESHOLD,
};

/// Side of the first refinement stage.
pub const STAGE1_SIZE: usize = 28;
/// Side of the final mask of the default three-stage pipeline.
pub const FINAL_SIZE: usize = 112;
/// Probability clip applied before taking logarithms.
pub const BCE_EPS: f64 = 1e-7;
/// Highest supported stage index.
pub const MAX_STAGE: usize = 4;

/// Mask side for stage `k`.
pub fn stage_size(k: usize) -> usize {
    14 << k
}

/// Everything known about one stage after composition.
#[derive(Clone, Debug, PartialEq)]
pub struct StageState {
    pub k: usize,
    pub size: usize,
    /// Raw prediction `M^k`.
    pub raw_pred: ProbMask,
    /// Composed complete mask `M'^k`.
    pub complete_mask: BinaryMask,
    /// Boundary of `complete_mask` at the configured inference width.
    pub pred_boundary: BinaryMask,
}

/// Loss weights for the initial 14x14 prediction and the three refinement stages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub w_init: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl LossWeights {
    pub fn new(w_init: f64, w1: f64, w2: f64, w3: f64) -> Result<Self> {
        for (name, v) in [("w_init", w_init), ("w1", w1), ("w2", w2), ("w3", w3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "loss weight {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(Self { w_init, w1, w2, w3 })
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_init: 0.25,
            w1: 0.5,
            w2: 0.75,
            w3: 1.0,
        }
    }
}

/// Region supervised at stage `k`: the 2x upsample of the union of the
/// ground-truth and predicted boundaries from stage `k - 1`.
pub fn training_region(
    gt_prev: &BinaryMask,
    pred_prev: &BinaryMask,
    params: &BoundaryParams,
) -> Result<BinaryMask> {
    ensure_same_dims(gt_prev.dims(), pred_prev.dims())?;
    let union = boundary(gt_prev, params).or(&boundary(pred_prev, params))?;
    Ok(upsample2x_binary(&union))
}

#[inline]
fn bce(p: f64, y: bool) -> f64 {
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if y {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Binary cross-entropy summed over region pixels of every instance and divided
/// by the total region pixel count of the batch. Returns 0 for an empty region.
pub fn region_bce_loss(
    preds: &[ProbMask],
    gts: &[BinaryMask],
    regions: &[BinaryMask],
) -> Result<f64> {
    if gts.len() != preds.len() {
        return Err(Error::Arity {
            expected: preds.len(),
            found: gts.len(),
        });
    }
    if regions.len() != preds.len() {
        return Err(Error::Arity {
            expected: preds.len(),
            found: regions.len(),
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for ((p, y), r) in preds.iter().zip(gts).zip(regions) {
        ensure_same_dims(p.dims(), y.dims())?;
        ensure_same_dims(p.dims(), r.dims())?;
        for ((&pv, &yv), &rv) in p.as_slice().iter().zip(y.as_slice()).zip(r.as_slice()) {
            if rv != 0 {
                total += bce(pv, yv != 0);
                count += 1;
            }
        }
    }
    Ok(if count == 0 {
        0.0
    } else {
        total / count as f64
    })
}

/// Weighted sum of the initial loss and exactly three stage losses.
pub fn aggregate_losses(init_loss: f64, stage_losses: &[f64], w: &LossWeights) -> Result<f64> {
    let [s1, s2, s3] = stage_losses else {
        return Err(Error::Arity {
            expected: 3,
            found: stage_losses.len(),
        });
    };
    Ok(w.w_init * init_loss + w.w1 * s1 + w.w2 * s2 + w.w3 * s3)
}

/// One coarse-to-fine step: inside the upsampled previous boundary take the new
/// (binarized) prediction, elsewhere keep the upsampled previous mask.
pub fn compose_stage(
    prev_complete: &BinaryMask,
    prev_boundary: &BinaryMask,
    raw_pred: &ProbMask,
    threshold: f64,
) -> Result<BinaryMask> {
    ensure_same_dims(prev_complete.dims(), prev_boundary.dims())?;
    let (h, w) = prev_complete.dims();
    ensure_same_dims((2 * h, 2 * w), raw_pred.dims())?;
    let gate = upsample2x_binary(prev_boundary);
    let carried = upsample2x_binary(prev_complete);
    let fresh = binarize(raw_pred, threshold);
    let data = gate
        .as_slice()
        .iter()
        .zip(fresh.as_slice())
        .zip(carried.as_slice())
        .map(|((&g, &f), &c)| if g != 0 { f } else { c })
        .collect();
    BinaryMask::from_vec(2 * h, 2 * w, data)
}

fn check_stage(stage: usize, pred: &ProbMask) -> Result<()> {
    let expected = stage_size(stage);
    if pred.dims() != (expected, expected) {
        return Err(Error::StageSize {
            stage,
            expected,
            found: pred.dims(),
        });
    }
    Ok(())
}

/// Runs the full composition and returns every stage's state.
///
/// `stage_preds` holds the predictions for stages 2, 3 (and optionally 4).
pub fn run_pipeline_stages(
    stage1_pred: &ProbMask,
    stage_preds: &[ProbMask],
    params: &BoundaryParams,
) -> Result<Vec<StageState>> {
    check_stage(1, stage1_pred)?;
    if stage_preds.len() > MAX_STAGE - 1 {
        return Err(Error::Arity {
            expected: MAX_STAGE - 1,
            found: stage_preds.len(),
        });
    }
    for (offset, pred) in stage_preds.iter().enumerate() {
        check_stage(offset + 2, pred)?;
    }

    let first = binarize(stage1_pred, DEFAULT_THRESHOLD);
    let mut states = vec![StageState {
        k: 1,
        size: STAGE1_SIZE,
        raw_pred: stage1_pred.clone(),
        pred_boundary: boundary(&first, params),
        complete_mask: first,
    }];
    for (offset, pred) in stage_preds.iter().enumerate() {
        let prev = states.last().expect("stage 1 present");
        let complete = compose_stage(
            &prev.complete_mask,
            &prev.pred_boundary,
            pred,
            DEFAULT_THRESHOLD,
        )?;
        let k = offset + 2;
        states.push(StageState {
            k,
            size: stage_size(k),
            raw_pred: pred.clone(),
            pred_boundary: boundary(&complete, params),
            complete_mask: complete,
        });
    }
    Ok(states)
}

/// Final composed mask (112x112 for the default three stages).
pub fn run_pipeline(
    stage1_pred: &ProbMask,
    stage_preds: &[ProbMask],
    params: &BoundaryParams,
) -> Result<BinaryMask> {
    let mut states = run_pipeline_stages(stage1_pred, stage_preds, params)?;
    Ok(states.pop().expect("at least one stage").complete_mask)
}

/// Stage-1-only baseline: binarize the 28x28 prediction and upsample it
/// `levels` times without any refinement.
pub fn upsample_baseline(stage1_pred: &ProbMask, levels: usize) -> Result<BinaryMask> {
    check_stage(1, stage1_pred)?;
    let mut m = binarize(stage1_pred, DEFAULT_THRESHOLD);
    for _ in 0..levels {
        m = upsample2x_binary(&m);
    }
    Ok(m)
}

/// Stand-in for a trained mask head: area-averages a 112x112 ground truth down to
/// the three stage resolutions.
pub fn oracle_stage_predictor(gt_full: &BinaryMask) -> Result<(ProbMask, ProbMask, ProbMask)> {
    if gt_full.dims() != (FINAL_SIZE, FINAL_SIZE) {
        return Err(Error::StageSize {
            stage: 3,
            expected: FINAL_SIZE,
            found: gt_full.dims(),
        });
    }
    Ok((
        area_downsample(gt_full, 4)?,
        area_downsample(gt_full, 2)?,
        gt_full.to_prob(),
    ))
}

/// Oracle-driven prediction for one image-space ground-truth instance.
///
/// The instance is resampled to a 112x112 RoI under `bbox`, the oracle stage
/// predictions are either composed (`pipeline = true`) or reduced to the
/// stage-1 upsample baseline, and the result is pasted back into the image.
pub fn oracle_instance_prediction(
    gt: &BinaryMask,
    bbox: &BBox,
    pipeline: bool,
    params: &BoundaryParams,
) -> Result<BinaryMask> {
    let roi = crop_resize_gt(gt, bbox, FINAL_SIZE)?;
    let (s1, s2, s3) = oracle_stage_predictor(&roi)?;
    let refined = if pipeline {
        run_pipeline(&s1, &[s2, s3], params)?
    } else {
        upsample_baseline(&s1, 2)?
    };
    paste_into_image(&refined, bbox, gt.height(), gt.width())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::BoundaryMethod;

    #[test]
    fn default_weights() {
        let w = LossWeights::default();
        assert_eq!((w.w_init, w.w1, w.w2, w.w3), (0.25, 0.5, 0.75, 1.0));
        assert_eq!(aggregate_losses(1.0, &[1.0, 1.0, 1.0], &w).unwrap(), 2.5);
        assert_eq!(aggregate_losses(0.0, &[0.0, 0.0, 0.0], &w).unwrap(), 0.0);
        let zero = LossWeights::new(0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(aggregate_losses(3.0, &[7.0, 1.5, 9.0], &zero).unwrap(), 0.0);
        assert!(matches!(
            aggregate_losses(1.0, &[1.0, 1.0], &w),
            Err(Error::Arity {
                expected: 3,
                found: 2
            })
        ));
        assert!(LossWeights::new(-0.1, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn single_pixel_loss_is_ln2() {
        let p = ProbMask::filled(2, 2, 0.5).unwrap();
        let y = BinaryMask::ones(2, 2).unwrap();
        let r = BinaryMask::from_rows(&["10", "00"]).unwrap();
        let l = region_bce_loss(&[p], &[y], &[r]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn empty_region_loss_is_zero() {
        let p = ProbMask::filled(3, 3, 0.2).unwrap();
        let y = BinaryMask::ones(3, 3).unwrap();
        let r = BinaryMask::zeros(3, 3).unwrap();
        assert_eq!(region_bce_loss(&[p], &[y], &[r]).unwrap(), 0.0);
        assert_eq!(region_bce_loss(&[], &[], &[]).unwrap(), 0.0);
    }

    #[test]
    fn loss_shape_errors() {
        let p = ProbMask::filled(3, 3, 0.2).unwrap();
        let y = BinaryMask::ones(3, 4).unwrap();
        let r = BinaryMask::ones(3, 3).unwrap();
        assert!(matches!(
            region_bce_loss(std::slice::from_ref(&p), &[y], std::slice::from_ref(&r)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            region_bce_loss(&[p], &[], &[r]),
            Err(Error::Arity { .. })
        ));
    }

    #[test]
    fn training_region_trivial_cases() {
        let params = BoundaryParams::training();
        let z = BinaryMask::zeros(28, 28).unwrap();
        assert!(!training_region(&z, &z, &params).unwrap().any());
        let m = BinaryMask::from_fn(28, 28, |i, j| (5..20).contains(&i) && (8..22).contains(&j))
            .unwrap();
        let r = training_region(&m, &m, &params).unwrap();
        assert_eq!(r, upsample2x_binary(&boundary(&m, &params)));
        assert_eq!(r.dims(), (56, 56));
        let other = BinaryMask::zeros(27, 28).unwrap();
        assert!(training_region(&m, &other, &params).is_err());
    }

    #[test]
    fn compose_extremes() {
        let prev = BinaryMask::from_fn(4, 4, |i, j| i < 2 && j < 3).unwrap();
        let raw =
            ProbMask::from_vec(8, 8, (0..64).map(|v| f64::from(v % 3) / 2.0).collect()).unwrap();
        let all = BinaryMask::ones(4, 4).unwrap();
        let none = BinaryMask::zeros(4, 4).unwrap();
        assert_eq!(
            compose_stage(&prev, &all, &raw, 0.5).unwrap(),
            binarize(&raw, 0.5)
        );
        assert_eq!(
            compose_stage(&prev, &none, &raw, 0.5).unwrap(),
            upsample2x_binary(&prev)
        );
        let bad = ProbMask::filled(6, 8, 0.0).unwrap();
        assert!(compose_stage(&prev, &all, &bad, 0.5).is_err());
    }

    #[test]
    fn compose_hand_evaluated() {
        // Previous mask: left half set. Boundary: a single pixel at (1, 1).
        let prev = BinaryMask::from_fn(4, 4, |_, j| j < 2).unwrap();
        let gate = BinaryMask::from_rows(&["0000", "0100", "0000", "0000"]).unwrap();
        // The upsampled single pixel covers output rows 2..4 and cols 2..4
        // (each axis samples index 1 with weight >= 0.75 only there; corners
        // at 0.5625 pass, edge pixels at 0.1875 do not).
        let raw = ProbMask::from_vec(
            8,
            8,
            (0..64)
                .map(|v| if v % 2 == 0 { 0.9 } else { 0.1 })
                .collect(),
        )
        .unwrap();
        let out = compose_stage(&prev, &gate, &raw, 0.5).unwrap();
        let expected = BinaryMask::from_rows(&[
            "11110000", "11110000", "11100000", "11100000", "11110000", "11110000", "11110000",
            "11110000",
        ])
        .unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn pipeline_constant_one() {
        let params = BoundaryParams::inference();
        let s1 = ProbMask::filled(28, 28, 1.0).unwrap();
        let s2 = ProbMask::filled(56, 56, 1.0).unwrap();
        let s3 = ProbMask::filled(112, 112, 1.0).unwrap();
        let out = run_pipeline(&s1, &[s2, s3], &params).unwrap();
        assert_eq!(out, BinaryMask::ones(112, 112).unwrap());
    }

    #[test]
    fn pipeline_size_errors() {
        let params = BoundaryParams::inference();
        let s1 = ProbMask::filled(28, 28, 1.0).unwrap();
        let bad = ProbMask::filled(60, 60, 1.0).unwrap();
        assert!(matches!(
            run_pipeline(&s1, &[bad], &params),
            Err(Error::StageSize { stage: 2, .. })
        ));
        let small = ProbMask::filled(14, 14, 1.0).unwrap();
        assert!(run_pipeline(&small, &[], &params).is_err());
    }

    #[test]
    fn pipeline_states_follow_invariants() {
        let gt = BinaryMask::from_fn(112, 112, |i, j| {
            let (y, x) = (i as f64 - 55.5, j as f64 - 60.0);
            y * y / 1600.0 + x * x / 900.0 <= 1.0
        })
        .unwrap();
        let (s1, s2, s3) = oracle_stage_predictor(&gt).unwrap();
        for method in [BoundaryMethod::Approx, BoundaryMethod::Exact] {
            let params = BoundaryParams::new(1, method).unwrap();
            let states = run_pipeline_stages(&s1, &[s2.clone(), s3.clone()], &params).unwrap();
            assert_eq!(states.len(), 3);
            for s in &states {
                assert_eq!(s.size, stage_size(s.k));
                assert_eq!(s.complete_mask.dims(), (s.size, s.size));
                assert_eq!(s.pred_boundary, boundary(&s.complete_mask, &params));
            }
        }
    }

    #[test]
    fn oracle_predictor_constants() {
        let (a, b, c) = oracle_stage_predictor(&BinaryMask::ones(112, 112).unwrap()).unwrap();
        assert_eq!(
            (a.dims(), b.dims(), c.dims()),
            ((28, 28), (56, 56), (112, 112))
        );
        assert!(a
            .as_slice()
            .iter()
            .chain(b.as_slice())
            .chain(c.as_slice())
            .all(|&v| v == 1.0));
        let (a, b, c) = oracle_stage_predictor(&BinaryMask::zeros(112, 112).unwrap()).unwrap();
        assert!(a
            .as_slice()
            .iter()
            .chain(b.as_slice())
            .chain(c.as_slice())
            .all(|&v| v == 0.0));
        assert!(oracle_stage_predictor(&BinaryMask::ones(56, 56).unwrap()).is_err());
    }
}
