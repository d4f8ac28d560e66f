//! Python bindings.
//!
//! Masks cross the boundary as row-major byte buffers (one `0`/`1` byte per
//! pixel) plus an explicit `(height, width)` shape; score maps as flat lists of
//! floats. Every function is pure and holds no state between calls.

use std::collections::HashMap;

use maskforge::{
    boundary, evaluate_corpus, run_pipeline, BinaryMask, BoundaryMethod, BoundaryParams,
    EvalConfig, ProbMask,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_mask(buf: &[u8], shape: (usize, usize)) -> Result<BinaryMask, maskforge::Error> {
    BinaryMask::from_vec(shape.0, shape.1, buf.to_vec())
}

fn to_prob(values: Vec<f64>, side: usize) -> Result<ProbMask, maskforge::Error> {
    ProbMask::from_vec(side, side, values)
}

fn params(width: usize, method: &str) -> Result<BoundaryParams, maskforge::Error> {
    BoundaryParams::new(width, method.parse::<BoundaryMethod>()?)
}

/// Boundary region of a mask. Returns a byte buffer with the input's shape.
#[pyfunction]
#[pyo3(name = "boundary", signature = (mask, shape, width = 2, method = "approx"))]
fn boundary_region<'py>(
    py: Python<'py>,
    mask: &[u8],
    shape: (usize, usize),
    width: usize,
    method: &str,
) -> PyResult<Bound<'py, PyBytes>> {
    let m = to_mask(mask, shape).map_err(value_err)?;
    let p = params(width, method).map_err(value_err)?;
    let out = py.detach(|| boundary(&m, &p));
    Ok(PyBytes::new(py, out.as_slice()))
}

/// Composes 28x28, 56x56 and 112x112 score maps into the final 112x112 mask.
#[pyfunction]
#[pyo3(signature = (stage1, stage2, stage3, dhat = 1, method = "approx"))]
fn refine<'py>(
    py: Python<'py>,
    stage1: Vec<f64>,
    stage2: Vec<f64>,
    stage3: Vec<f64>,
    dhat: usize,
    method: &str,
) -> PyResult<Bound<'py, PyBytes>> {
    let s1 = to_prob(stage1, 28).map_err(value_err)?;
    let s2 = to_prob(stage2, 56).map_err(value_err)?;
    let s3 = to_prob(stage3, 112).map_err(value_err)?;
    let p = params(dhat, method).map_err(value_err)?;
    let out = py
        .detach(|| run_pipeline(&s1, &[s2, s3], &p))
        .map_err(value_err)?;
    Ok(PyBytes::new(py, out.as_slice()))
}

/// Boundary F1 and region accuracies over scenes of ground-truth and predicted
/// masks. `shapes[s]` is the image shape of scene `s`.
#[pyfunction]
#[pyo3(signature = (gt, pred, shapes, tolerances = vec![1, 3], dhat = 2, iou_floor = 0.5))]
fn evaluate(
    py: Python<'_>,
    gt: Vec<Vec<Vec<u8>>>,
    pred: Vec<Vec<Vec<u8>>>,
    shapes: Vec<(usize, usize)>,
    tolerances: Vec<usize>,
    dhat: usize,
    iou_floor: f64,
) -> PyResult<HashMap<String, f64>> {
    if gt.len() != shapes.len() || pred.len() != shapes.len() {
        return Err(PyValueError::new_err(
            "gt, pred and shapes must have one entry per scene",
        ));
    }
    let decode = |scenes: Vec<Vec<Vec<u8>>>| -> PyResult<Vec<Vec<BinaryMask>>> {
        scenes
            .into_iter()
            .zip(&shapes)
            .map(|(masks, &shape)| {
                masks
                    .iter()
                    .map(|b| to_mask(b, shape).map_err(value_err))
                    .collect()
            })
            .collect()
    };
    let gt_set = decode(gt)?;
    let pred_set = decode(pred)?;
    let cfg = EvalConfig {
        tolerances,
        d_hat: dhat,
        iou_floor,
    };
    let report = py
        .detach(|| evaluate_corpus(&gt_set, &pred_set, &cfg))
        .map_err(value_err)?;
    let mut out: HashMap<String, f64> = report
        .f_boundary
        .iter()
        .map(|(n, f)| (format!("f_{n}px"), *f))
        .collect();
    out.insert("boundary_acc".into(), report.boundary_acc);
    out.insert("nonboundary_acc".into(), report.nonboundary_acc);
    out.insert("n_matched".into(), report.n_matched as f64);
    out.insert("n_ignored".into(), report.n_ignored as f64);
    Ok(out)
}

#[pymodule]
fn maskforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(boundary_region, m)?)?;
    m.add_function(wrap_pyfunction!(refine, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
