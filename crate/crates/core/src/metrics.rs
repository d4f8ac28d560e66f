//! Boundary-quality evaluation: boundary F1 within `n` pixels, accuracy inside and
//! outside the ground-truth boundary region, and the instance matching feeding them.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::boundary::{boundary_exact, contour, squared_distance_transform};
use crate::error::{Error, Result};
use crate::mask::{ensure_same_dims, mask_iou, BinaryMask};

/// A ground-truth instance and the prediction assigned to it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchedPair {
    pub gt_id: usize,
    pub pred_id: usize,
    pub iou: f64,
}

/// Greedy one-to-one matching on mask IoU.
///
/// Candidate pairs with IoU at or above `iou_floor` are taken in order of
/// descending IoU (ties: lower GT index, then lower prediction index); each
/// ground truth and each prediction is used at most once. Output is sorted by
/// `gt_id`.
pub fn match_instances(
    gts: &[BinaryMask],
    preds: &[BinaryMask],
    iou_floor: f64,
) -> Result<Vec<MatchedPair>> {
    let mut candidates = Vec::new();
    for (g, gt) in gts.iter().enumerate() {
        for (p, pred) in preds.iter().enumerate() {
            let iou = mask_iou(gt, pred)?;
            if iou >= iou_floor && iou > 0.0 {
                candidates.push(MatchedPair {
                    gt_id: g,
                    pred_id: p,
                    iou,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then(a.gt_id.cmp(&b.gt_id))
            .then(a.pred_id.cmp(&b.pred_id))
    });
    let mut gt_used = vec![false; gts.len()];
    let mut pred_used = vec![false; preds.len()];
    let mut matched = Vec::new();
    for c in candidates {
        if !gt_used[c.gt_id] && !pred_used[c.pred_id] {
            gt_used[c.gt_id] = true;
            pred_used[c.pred_id] = true;
            matched.push(c);
        }
    }
    matched.sort_by_key(|m| m.gt_id);
    Ok(matched)
}

/// Fraction of `from`'s contour pixels within distance `n` of `to`'s contour.
fn contour_hits(from: &BinaryMask, to_dist: &[u64], n: usize) -> (usize, usize) {
    let limit = (n as u64).pow(2);
    from.as_slice()
        .iter()
        .zip(to_dist)
        .filter(|(&c, _)| c != 0)
        .fold((0, 0), |(hit, total), (_, &d)| {
            (hit + usize::from(d <= limit), total + 1)
        })
}

/// Boundary F1 within `n` pixels, on 4-connected contours.
///
/// Both contours empty gives 1; exactly one empty gives 0.
pub fn boundary_f1(gt: &BinaryMask, pred: &BinaryMask, n: usize) -> Result<f64> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    if n == 0 {
        return Err(Error::InvalidParameter("tolerance must be >= 1".into()));
    }
    let gc = contour(gt);
    let pc = contour(pred);
    let (gd, pd) = match (
        squared_distance_transform(&gc),
        squared_distance_transform(&pc),
    ) {
        (None, None) => return Ok(1.0),
        (Some(gd), Some(pd)) => (gd, pd),
        _ => return Ok(0.0),
    };
    let (p_hit, p_total) = contour_hits(&pc, &gd, n);
    let (r_hit, r_total) = contour_hits(&gc, &pd, n);
    let precision = p_hit as f64 / p_total as f64;
    let recall = r_hit as f64 / r_total as f64;
    Ok(if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    })
}

/// Pixel accuracy inside and outside the ground-truth boundary region.
///
/// A region with no pixels reports accuracy 1.0; check the pixel counts to tell
/// that case apart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionAccuracy {
    pub boundary: f64,
    pub nonboundary: f64,
    pub boundary_pixels: usize,
    pub nonboundary_pixels: usize,
}

impl RegionAccuracy {
    pub fn boundary_empty(&self) -> bool {
        self.boundary_pixels == 0
    }

    pub fn nonboundary_empty(&self) -> bool {
        self.nonboundary_pixels == 0
    }
}

pub fn region_accuracies(
    gt: &BinaryMask,
    pred: &BinaryMask,
    d_hat: usize,
) -> Result<RegionAccuracy> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    if d_hat == 0 {
        return Err(Error::InvalidParameter(
            "boundary width must be >= 1".into(),
        ));
    }
    let region = boundary_exact(gt, d_hat);
    let (mut in_hit, mut in_total, mut out_hit, mut out_total) = (0usize, 0usize, 0usize, 0usize);
    for ((&r, &g), &p) in region
        .as_slice()
        .iter()
        .zip(gt.as_slice())
        .zip(pred.as_slice())
    {
        let ok = usize::from(g == p);
        if r != 0 {
            in_hit += ok;
            in_total += 1;
        } else {
            out_hit += ok;
            out_total += 1;
        }
    }
    let ratio = |hit: usize, total: usize| {
        if total == 0 {
            1.0
        } else {
            hit as f64 / total as f64
        }
    };
    Ok(RegionAccuracy {
        boundary: ratio(in_hit, in_total),
        nonboundary: ratio(out_hit, out_total),
        boundary_pixels: in_total,
        nonboundary_pixels: out_total,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    /// Pixel tolerances for boundary F1.
    pub tolerances: Vec<usize>,
    /// Boundary width used for the region accuracies.
    pub d_hat: usize,
    /// Minimum IoU for a prediction to count as positive.
    pub iou_floor: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            tolerances: vec![1, 3],
            d_hat: 2,
            iou_floor: 0.5,
        }
    }
}

/// Macro averages over matched instances.
///
/// Unmatched ground truths are counted in `n_ignored` and excluded. With no
/// matches at all every ratio is 0.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub f_boundary: BTreeMap<usize, f64>,
    pub boundary_acc: f64,
    pub nonboundary_acc: f64,
    pub n_matched: usize,
    pub n_ignored: usize,
}

impl EvalReport {
    /// Flat key/value view: `f_{n}px`, `boundary_acc`, `nonboundary_acc`,
    /// `n_matched`, `n_ignored`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (n, f) in &self.f_boundary {
            map.insert(format!("f_{n}px"), (*f).into());
        }
        map.insert("boundary_acc".into(), self.boundary_acc.into());
        map.insert("nonboundary_acc".into(), self.nonboundary_acc.into());
        map.insert("n_matched".into(), self.n_matched.into());
        map.insert("n_ignored".into(), self.n_ignored.into());
        serde_json::Value::Object(map)
    }
}

struct PairScore {
    f: Vec<f64>,
    acc: RegionAccuracy,
}

fn score_scene(
    gts: &[BinaryMask],
    preds: &[BinaryMask],
    cfg: &EvalConfig,
) -> Result<Vec<PairScore>> {
    if let Some(first) = gts.first().or(preds.first()) {
        for m in gts.iter().chain(preds) {
            ensure_same_dims(first.dims(), m.dims())?;
        }
    }
    match_instances(gts, preds, cfg.iou_floor)?
        .into_iter()
        .map(|pair| {
            let (g, p) = (&gts[pair.gt_id], &preds[pair.pred_id]);
            let f = cfg
                .tolerances
                .iter()
                .map(|&n| boundary_f1(g, p, n))
                .collect::<Result<Vec<_>>>()?;
            Ok(PairScore {
                f,
                acc: region_accuracies(g, p, cfg.d_hat)?,
            })
        })
        .collect()
}

/// Evaluates scene-aligned ground-truth and prediction sets.
///
/// `gt_set[s]` and `pred_set[s]` hold the instances of scene `s`. Scenes are
/// scored in parallel; aggregation runs in scene order so the report does not
/// depend on scheduling.
pub fn evaluate_corpus(
    gt_set: &[Vec<BinaryMask>],
    pred_set: &[Vec<BinaryMask>],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if gt_set.len() != pred_set.len() {
        return Err(Error::Arity {
            expected: gt_set.len(),
            found: pred_set.len(),
        });
    }
    let n_gt: usize = gt_set.iter().map(Vec::len).sum();
    if n_gt == 0 {
        return Err(Error::EmptyCorpus);
    }
    let per_scene = gt_set
        .par_iter()
        .zip(pred_set.par_iter())
        .map(|(g, p)| score_scene(g, p, cfg))
        .collect::<Result<Vec<_>>>()?;

    let scores: Vec<PairScore> = per_scene.into_iter().flatten().collect();
    let n_matched = scores.len();
    let mean = |values: &mut dyn Iterator<Item = f64>| {
        let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        (count > 0).then(|| sum / count as f64)
    };
    let f_boundary = cfg
        .tolerances
        .iter()
        .enumerate()
        .map(|(t, &n)| (n, mean(&mut scores.iter().map(|s| s.f[t])).unwrap_or(0.0)))
        .collect();
    let region_mean = |pick: fn(&RegionAccuracy) -> Option<f64>| {
        if n_matched == 0 {
            return 0.0;
        }
        mean(&mut scores.iter().filter_map(|s| pick(&s.acc))).unwrap_or(1.0)
    };
    Ok(EvalReport {
        f_boundary,
        boundary_acc: region_mean(|a| (!a.boundary_empty()).then_some(a.boundary)),
        nonboundary_acc: region_mean(|a| (!a.nonboundary_empty()).then_some(a.nonboundary)),
        n_matched,
        n_ignored: n_gt - n_matched,
    })
}
