//! Boundary regions of binary masks.
//!
//! Two constructions are provided:
//!
//! * [`boundary_exact`]: every pixel whose Euclidean distance to the mask contour
//!   is at most `d_hat`, computed with an exact squared-distance transform.
//! * [`boundary_approx`]: the zero-sum convolution operator (center `side^2 - 1`,
//!   all other taps `-1`) applied to the mask and to its reversal; positive
//!   responses mark the foreground and background sides respectively.
//!
//! The image exterior is treated as background by both constructions. For the
//! reversed pass that means the exterior counts as *foreground* of the reversed
//! mask, so an all-background mask has no boundary, while an all-foreground mask
//! gets its image border marked.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mask::{mask_iou, BinaryMask};

/// Which boundary construction to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BoundaryMethod {
    Exact,
    #[default]
    Approx,
}

impl std::str::FromStr for BoundaryMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(BoundaryMethod::Exact),
            "approx" => Ok(BoundaryMethod::Approx),
            other => Err(Error::InvalidParameter(format!(
                "unknown boundary method {other:?} (expected exact or approx)"
            ))),
        }
    }
}

/// Boundary width plus method selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BoundaryParams {
    width: usize,
    pub method: BoundaryMethod,
}

impl BoundaryParams {
    /// Width used when building training regions.
    pub const TRAINING_WIDTH: usize = 2;
    /// Width used when composing stages at inference.
    pub const INFERENCE_WIDTH: usize = 1;

    pub fn new(width: usize, method: BoundaryMethod) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidParameter(
                "boundary width must be >= 1".into(),
            ));
        }
        Ok(Self { width, method })
    }

    pub fn training() -> Self {
        Self {
            width: Self::TRAINING_WIDTH,
            method: BoundaryMethod::Approx,
        }
    }

    pub fn inference() -> Self {
        Self {
            width: Self::INFERENCE_WIDTH,
            method: BoundaryMethod::Approx,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

impl Default for BoundaryParams {
    fn default() -> Self {
        Self::inference()
    }
}

/// Square zero-sum kernel of side `2 * width + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryKernel {
    side: usize,
    weights: Vec<i64>,
}

impl BoundaryKernel {
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn get(&self, row: usize, col: usize) -> i64 {
        self.weights[row * self.side + col]
    }

    /// Row-major weights.
    pub fn weights(&self) -> &[i64] {
        &self.weights
    }

    pub fn sum(&self) -> i64 {
        self.weights.iter().sum()
    }
}

/// Kernel for boundary width `width`.
///
/// # Panics
///
/// Panics if `width == 0`.
pub fn make_kernel(width: usize) -> BoundaryKernel {
    assert!(width >= 1, "boundary width must be >= 1");
    let side = 2 * width + 1;
    let mut weights = vec![-1i64; side * side];
    weights[width * side + width] = (side * side) as i64 - 1;
    BoundaryKernel { side, weights }
}

/// Foreground pixels with at least one background 4-neighbor; pixels outside the
/// image count as background.
pub fn contour(m: &BinaryMask) -> BinaryMask {
    let (h, w) = m.dims();
    let px = m.as_slice();
    let mut out = vec![0u8; h * w];
    for i in 0..h {
        for j in 0..w {
            let idx = i * w + j;
            if px[idx] == 0 {
                continue;
            }
            let edge = i == 0
                || j == 0
                || i + 1 == h
                || j + 1 == w
                || px[idx - w] == 0
                || px[idx + w] == 0
                || px[idx - 1] == 0
                || px[idx + 1] == 0;
            out[idx] = u8::from(edge);
        }
    }
    BinaryMask::from_vec(h, w, out).expect("contour preserves shape")
}

/// Squared Euclidean distance from each pixel to the nearest set pixel of `seeds`,
/// row-major. `None` when `seeds` is empty.
///
/// Exact: a column pass followed by a row-wise lower envelope of parabolas.
pub fn squared_distance_transform(seeds: &BinaryMask) -> Option<Vec<u64>> {
    if !seeds.any() {
        return None;
    }
    let (h, w) = seeds.dims();
    let px = seeds.as_slice();

    // Column pass: squared vertical distance to the nearest seed in the same column.
    let mut col = vec![u64::MAX; h * w];
    for j in 0..w {
        let mut last: Option<usize> = None;
        for i in 0..h {
            if px[i * w + j] != 0 {
                last = Some(i);
            }
            if let Some(k) = last {
                col[i * w + j] = ((i - k) as u64).pow(2);
            }
        }
        last = None;
        for i in (0..h).rev() {
            if px[i * w + j] != 0 {
                last = Some(i);
            }
            if let Some(k) = last {
                let d = ((k - i) as u64).pow(2);
                let slot = &mut col[i * w + j];
                *slot = (*slot).min(d);
            }
        }
    }

    // Row pass.
    let mut out = vec![0u64; h * w];
    let mut sites: Vec<usize> = Vec::with_capacity(w);
    let mut starts: Vec<f64> = Vec::with_capacity(w);
    for i in 0..h {
        let f = &col[i * w..(i + 1) * w];
        sites.clear();
        starts.clear();
        for q in 0..w {
            if f[q] == u64::MAX {
                continue;
            }
            let height_q = f[q] as f64 + (q * q) as f64;
            loop {
                match sites.last() {
                    None => {
                        sites.push(q);
                        starts.push(f64::NEG_INFINITY);
                        break;
                    }
                    Some(&p) => {
                        let height_p = f[p] as f64 + (p * p) as f64;
                        let s = (height_q - height_p) / (2.0 * (q - p) as f64);
                        if s <= *starts.last().expect("parallel stacks") {
                            sites.pop();
                            starts.pop();
                        } else {
                            sites.push(q);
                            starts.push(s);
                            break;
                        }
                    }
                }
            }
        }
        // Every row has a finite entry because some column holds a seed.
        let mut k = 0;
        for x in 0..w {
            while k + 1 < sites.len() && starts[k + 1] < x as f64 {
                k += 1;
            }
            let p = sites[k];
            out[i * w + x] = (x.abs_diff(p) as u64).pow(2) + f[p];
        }
    }
    Some(out)
}

/// Pixels (either side of the contour) within Euclidean distance `d_hat` of the contour.
///
/// # Panics
///
/// Panics if `d_hat == 0`.
pub fn boundary_exact(m: &BinaryMask, d_hat: usize) -> BinaryMask {
    assert!(d_hat >= 1, "boundary width must be >= 1");
    let (h, w) = m.dims();
    let edge = contour(m);
    let data = match squared_distance_transform(&edge) {
        None => vec![0u8; h * w],
        Some(dist) => {
            let limit = (d_hat as u64).pow(2);
            dist.iter().map(|&d| u8::from(d <= limit)).collect()
        }
    };
    BinaryMask::from_vec(h, w, data).expect("shape preserved")
}

/// Summed-area table with a zero row and column prepended.
fn integral(m: &BinaryMask) -> Vec<u32> {
    let (h, w) = m.dims();
    let px = m.as_slice();
    let stride = w + 1;
    let mut sat = vec![0u32; (h + 1) * stride];
    for i in 0..h {
        let mut row = 0u32;
        for j in 0..w {
            row += u32::from(px[i * w + j]);
            sat[(i + 1) * stride + j + 1] = sat[i * stride + j + 1] + row;
        }
    }
    sat
}

/// Convolutional approximation of the boundary region.
///
/// With the kernel from [`make_kernel`] the response at a pixel is
/// `side^2 * center - window_sum`, so a foreground pixel responds positively iff its
/// zero-padded window holds fewer than `side^2` ones, and a background pixel's
/// reversed response is positive iff its window holds any in-image foreground.
/// Window sums come from a summed-area table.
///
/// # Panics
///
/// Panics if `width == 0`.
pub fn boundary_approx(m: &BinaryMask, width: usize) -> BinaryMask {
    assert!(width >= 1, "boundary width must be >= 1");
    let (h, w) = m.dims();
    let px = m.as_slice();
    let sat = integral(m);
    let stride = w + 1;
    let side = 2 * width + 1;
    let full = (side * side) as u32;
    let mut out = vec![0u8; h * w];
    for i in 0..h {
        let r0 = i.saturating_sub(width);
        let r1 = (i + width + 1).min(h);
        for j in 0..w {
            let c0 = j.saturating_sub(width);
            let c1 = (j + width + 1).min(w);
            let sum = sat[r1 * stride + c1] + sat[r0 * stride + c0]
                - sat[r0 * stride + c1]
                - sat[r1 * stride + c0];
            let on_boundary = if px[i * w + j] != 0 {
                sum < full
            } else {
                sum > 0
            };
            out[i * w + j] = u8::from(on_boundary);
        }
    }
    BinaryMask::from_vec(h, w, out).expect("shape preserved")
}

/// Dispatches on `params.method`.
pub fn boundary(m: &BinaryMask, params: &BoundaryParams) -> BinaryMask {
    match params.method {
        BoundaryMethod::Exact => boundary_exact(m, params.width),
        BoundaryMethod::Approx => boundary_approx(m, params.width),
    }
}

/// Boundaries of many masks; output order follows input order.
pub fn boundary_batch(masks: &[BinaryMask], params: &BoundaryParams) -> Vec<BinaryMask> {
    masks.par_iter().map(|m| boundary(m, params)).collect()
}

/// IoU between the exact and approximated boundary regions at the same width.
pub fn boundary_agreement(m: &BinaryMask, width: usize) -> f64 {
    mask_iou(&boundary_exact(m, width), &boundary_approx(m, width))
        .expect("both regions share the mask's shape")
}
