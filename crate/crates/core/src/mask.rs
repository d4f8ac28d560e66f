//! Mask grids and the resampling / overlap primitives shared by every other module.
//!
//! All grids are stored row-major. Continuous coordinates follow the half-pixel
//! convention: pixel `(i, j)` covers `[j, j + 1) x [i, i + 1)` and its center sits
//! at `(j + 0.5, i + 0.5)`.

use std::fmt;

use crate::error::{Error, Result};

/// Default binarization threshold (`>=` tie-break).
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// A binary grid with explicit dimensions. Values are stored as `0`/`1` bytes.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        check_shape(height, width)?;
        Ok(Self {
            height,
            width,
            data: vec![0; height * width],
        })
    }

    pub fn ones(height: usize, width: usize) -> Result<Self> {
        check_shape(height, width)?;
        Ok(Self {
            height,
            width,
            data: vec![1; height * width],
        })
    }

    /// Builds a mask from a row-major buffer of `0`/`1` bytes.
    pub fn from_vec(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        check_shape(height, width)?;
        if data.len() != height * width {
            return Err(Error::BufferLength {
                expected: height * width,
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|&v| v > 1) {
            return Err(Error::ValueOutOfRange {
                index,
                value: f64::from(data[index]),
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_bools(height: usize, width: usize, bits: &[bool]) -> Result<Self> {
        Self::from_vec(height, width, bits.iter().map(|&b| u8::from(b)).collect())
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        check_shape(height, width)?;
        let mut data = Vec::with_capacity(height * width);
        for i in 0..height {
            for j in 0..width {
                data.push(u8::from(f(i, j)));
            }
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Parses equal-length rows of `0`/`1` (or `.`/`#`) characters.
    pub fn from_rows(rows: &[&str]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(height * width);
        for row in rows {
            if row.len() != width {
                return Err(Error::BufferLength {
                    expected: width,
                    found: row.len(),
                });
            }
            for ch in row.chars() {
                match ch {
                    '0' | '.' => data.push(0),
                    '1' | '#' => data.push(1),
                    other => {
                        return Err(Error::InvalidParameter(format!(
                            "unexpected mask character {other:?}"
                        )))
                    }
                }
            }
        }
        Self::from_vec(height, width, data)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false; masks have at least one pixel.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.width + j] != 0
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.data[i * self.width + j] = u8::from(value);
    }

    /// Row-major `0`/`1` bytes.
    #[inline]
    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<u8> {
        self.data
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().map(|&v| usize::from(v)).sum()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&v| v != 0)
    }

    pub fn not(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    pub fn or(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn and(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a & b)
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dims() == other.dims() && self.data.iter().zip(&other.data).all(|(&a, &b)| a <= b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(u8, u8) -> u8) -> Result<Self> {
        ensure_same_dims(self.dims(), other.dims())?;
        Ok(Self {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// The mask as a 0.0/1.0 score field.
    pub fn to_prob(&self) -> ProbMask {
        ProbMask {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    /// Smallest pixel-aligned box containing every foreground pixel.
    pub fn tight_bbox(&self) -> Option<BBox> {
        let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
        for i in 0..self.height {
            for j in 0..self.width {
                if self.get(i, j) {
                    r0 = r0.min(i);
                    r1 = r1.max(i);
                    c0 = c0.min(j);
                    c1 = c1.max(j);
                }
            }
        }
        (r0 != usize::MAX).then(|| BBox {
            x0: c0 as f64,
            y0: r0 as f64,
            x1: (c1 + 1) as f64,
            y1: (r1 + 1) as f64,
        })
    }
}

impl fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryMask {}x{}", self.height, self.width)?;
        for row in self.data.chunks(self.width) {
            let line: String = row
                .iter()
                .map(|&v| if v != 0 { '#' } else { '.' })
                .collect();
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}

/// Per-pixel scores in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbMask {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ProbMask {
    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(height, width)?;
        if data.len() != height * width {
            return Err(Error::BufferLength {
                expected: height * width,
                found: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::ValueOutOfRange {
                index,
                value: data[index],
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::from_vec(height, width, vec![value; height * width])
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Axis-aligned box in continuous image coordinates (`x` = column, `y` = row).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        // Also rejects NaN.
        if !(x0 < x1 && y0 < y1) {
            return Err(Error::DegenerateBox { x0, y0, x1, y1 });
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// Box covering a whole `height x width` image.
    pub fn covering(height: usize, width: usize) -> Self {
        Self {
            x0: 0.0,
            y0: 0.0,
            x1: width as f64,
            y1: height as f64,
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.x0, self.y0, self.x1, self.y1).map(|_| ())
    }
}

fn check_shape(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::EmptyShape { height, width });
    }
    Ok(())
}

pub(crate) fn ensure_same_dims(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Bilinear sample at continuous index coordinate `(y, x)` (pixel centers at integers),
/// clamping out-of-range neighbors to the nearest edge pixel.
fn sample_bilinear(
    height: usize,
    width: usize,
    at: impl Fn(usize, usize) -> f64,
    y: f64,
    x: f64,
) -> f64 {
    let (y0, fy) = split_coord(y, height);
    let (x0, fx) = split_coord(x, width);
    let y1 = (y0 + 1).min(height - 1);
    let x1 = (x0 + 1).min(width - 1);
    let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
    let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Integer base index and fractional weight, with the coordinate clamped into `[0, n - 1]`.
#[inline]
fn split_coord(v: f64, n: usize) -> (usize, f64) {
    let v = v.clamp(0.0, (n - 1) as f64);
    let base = v.floor();
    (base as usize, v - base)
}

/// Doubles both dimensions with half-pixel-center bilinear sampling.
pub fn upsample2x_bilinear(m: &ProbMask) -> ProbMask {
    let (h, w) = m.dims();
    let mut data = Vec::with_capacity(4 * h * w);
    for i in 0..2 * h {
        let y = (i as f64 + 0.5) / 2.0 - 0.5;
        for j in 0..2 * w {
            let x = (j as f64 + 0.5) / 2.0 - 0.5;
            data.push(sample_bilinear(h, w, |r, c| m.get(r, c), y, x));
        }
    }
    ProbMask {
        height: 2 * h,
        width: 2 * w,
        data,
    }
}

/// Bilinear 2x upsample of a binary field followed by a `>= 0.5` threshold.
///
/// For a 2x upsample every output pixel blends its nearest source pixel and the
/// three neighbors on the side it leans toward with weights 9/16, 3/16, 3/16, 1/16,
/// so the threshold test is done in exact integer sixteenths.
pub fn upsample2x_binary(m: &BinaryMask) -> BinaryMask {
    let (h, w) = m.dims();
    let src = m.as_slice();
    let mut data = Vec::with_capacity(4 * h * w);
    for i in 0..2 * h {
        let r = i / 2;
        // Even output rows lean up, odd rows lean down; clamp at the edges.
        let rn = if i % 2 == 0 {
            r.saturating_sub(1)
        } else {
            (r + 1).min(h - 1)
        };
        for j in 0..2 * w {
            let c = j / 2;
            let cn = if j % 2 == 0 {
                c.saturating_sub(1)
            } else {
                (c + 1).min(w - 1)
            };
            let acc = 9 * u32::from(src[r * w + c])
                + 3 * u32::from(src[rn * w + c])
                + 3 * u32::from(src[r * w + cn])
                + u32::from(src[rn * w + cn]);
            data.push(u8::from(acc >= 8));
        }
    }
    BinaryMask {
        height: 2 * h,
        width: 2 * w,
        data,
    }
}

/// `out(i, j) = 1` iff `m(i, j) >= threshold`.
pub fn binarize(m: &ProbMask, threshold: f64) -> BinaryMask {
    BinaryMask {
        height: m.height,
        width: m.width,
        data: m.data.iter().map(|&v| u8::from(v >= threshold)).collect(),
    }
}

/// Intersection over union. Two empty masks have IoU 1.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    ensure_same_dims(a.dims(), b.dims())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        inter += usize::from(x & y);
        union += usize::from(x | y);
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Resamples the part of `gt` under `bbox` onto an `out_size x out_size` grid.
///
/// Each output cell center is mapped back into the image, the 0/1 field is
/// sampled bilinearly (edge-clamped), and the result thresholded at 0.5.
pub fn crop_resize_gt(gt: &BinaryMask, bbox: &BBox, out_size: usize) -> Result<BinaryMask> {
    bbox.validate()?;
    if out_size == 0 {
        return Err(Error::InvalidParameter("out_size must be >= 1".into()));
    }
    let (h, w) = gt.dims();
    if bbox.x1 <= 0.0 || bbox.y1 <= 0.0 || bbox.x0 >= w as f64 || bbox.y0 >= h as f64 {
        return Err(Error::BoxOutsideImage {
            height: h,
            width: w,
        });
    }
    let sy = bbox.height() / out_size as f64;
    let sx = bbox.width() / out_size as f64;
    let field = |r: usize, c: usize| f64::from(gt.data[r * w + c]);
    let mut data = Vec::with_capacity(out_size * out_size);
    for i in 0..out_size {
        let y = bbox.y0 + (i as f64 + 0.5) * sy - 0.5;
        for j in 0..out_size {
            let x = bbox.x0 + (j as f64 + 0.5) * sx - 0.5;
            data.push(u8::from(
                sample_bilinear(h, w, field, y, x) >= DEFAULT_THRESHOLD,
            ));
        }
    }
    Ok(BinaryMask {
        height: out_size,
        width: out_size,
        data,
    })
}

/// Inverse of [`crop_resize_gt`]: places a square RoI mask back into a
/// `height x width` image under `bbox`. Pixels whose centers fall outside the
/// box are background.
pub fn paste_into_image(
    roi: &BinaryMask,
    bbox: &BBox,
    height: usize,
    width: usize,
) -> Result<BinaryMask> {
    bbox.validate()?;
    let mut out = BinaryMask::zeros(height, width)?;
    let (rh, rw) = roi.dims();
    let sy = rh as f64 / bbox.height();
    let sx = rw as f64 / bbox.width();
    let field = |r: usize, c: usize| f64::from(roi.data[r * rw + c]);
    for i in 0..height {
        let cy = i as f64 + 0.5;
        if cy < bbox.y0 || cy >= bbox.y1 {
            continue;
        }
        let v = (cy - bbox.y0) * sy - 0.5;
        for j in 0..width {
            let cx = j as f64 + 0.5;
            if cx < bbox.x0 || cx >= bbox.x1 {
                continue;
            }
            let u = (cx - bbox.x0) * sx - 0.5;
            if sample_bilinear(rh, rw, field, v, u) >= DEFAULT_THRESHOLD {
                out.set(i, j, true);
            }
        }
    }
    Ok(out)
}

/// Block-mean downsample by an integer factor (area averaging).
pub fn area_downsample(m: &BinaryMask, factor: usize) -> Result<ProbMask> {
    let (h, w) = m.dims();
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::InvalidParameter(format!(
            "cannot area-downsample {h}x{w} by {factor}"
        )));
    }
    let (oh, ow) = (h / factor, w / factor);
    let area = (factor * factor) as f64;
    let mut data = Vec::with_capacity(oh * ow);
    for bi in 0..oh {
        for bj in 0..ow {
            let mut count = 0u32;
            for i in bi * factor..(bi + 1) * factor {
                for j in bj * factor..(bj + 1) * factor {
                    count += u32::from(m.data[i * w + j]);
                }
            }
            data.push(f64::from(count) / area);
        }
    }
    Ok(ProbMask {
        height: oh,
        width: ow,
        data,
    })
}
