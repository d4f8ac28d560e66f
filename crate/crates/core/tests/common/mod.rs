//! Brute-force oracles shared by the integration suites. Each one is written
//! straight from the definition and deliberately avoids the library's fast paths.

#![allow(dead_code)]

use maskforge::{BinaryMask, ProbMask};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn grid(m: &BinaryMask) -> Vec<Vec<bool>> {
    (0..m.height())
        .map(|i| (0..m.width()).map(|j| m.get(i, j)).collect())
        .collect()
}

pub fn from_grid(g: &[Vec<bool>]) -> BinaryMask {
    let flat: Vec<bool> = g.iter().flatten().copied().collect();
    BinaryMask::from_bools(g.len(), g[0].len(), &flat).unwrap()
}

/// Foreground pixels with a background (or out-of-image) 4-neighbor, as a list.
pub fn contour_points(m: &BinaryMask) -> Vec<(i64, i64)> {
    let g = grid(m);
    let (h, w) = (g.len() as i64, g[0].len() as i64);
    let at = |i: i64, j: i64| i >= 0 && j >= 0 && i < h && j < w && g[i as usize][j as usize];
    let mut out = Vec::new();
    for i in 0..h {
        for j in 0..w {
            if at(i, j)
                && [(-1, 0), (1, 0), (0, -1), (0, 1)]
                    .iter()
                    .any(|(di, dj)| !at(i + di, j + dj))
            {
                out.push((i, j));
            }
        }
    }
    out
}

/// All-pairs minimum squared distance to a point set; `None` for an empty set.
pub fn min_sq_dist(points: &[(i64, i64)], i: i64, j: i64) -> Option<i64> {
    points
        .iter()
        .map(|&(a, b)| (a - i).pow(2) + (b - j).pow(2))
        .min()
}

pub fn brute_boundary_exact(m: &BinaryMask, d_hat: usize) -> BinaryMask {
    let pts = contour_points(m);
    let limit = (d_hat as i64).pow(2);
    BinaryMask::from_fn(m.height(), m.width(), |i, j| {
        min_sq_dist(&pts, i as i64, j as i64).is_some_and(|d| d <= limit)
    })
    .unwrap()
}

/// Direct convolution with explicit kernel weights. The mask is zero-padded, and
/// the background pass convolves the reversal of that padded array.
pub fn brute_boundary_approx(m: &BinaryMask, width: usize) -> BinaryMask {
    let (h, w) = m.dims();
    let side = 2 * width + 1;
    let kernel = |r: usize, c: usize| -> i64 {
        if r == width && c == width {
            (side * side) as i64 - 1
        } else {
            -1
        }
    };
    let (ph, pw) = (h + 2 * width, w + 2 * width);
    let mut padded = vec![vec![0i64; pw]; ph];
    for i in 0..h {
        for j in 0..w {
            padded[i + width][j + width] = i64::from(m.get(i, j));
        }
    }
    let reversed: Vec<Vec<i64>> = padded
        .iter()
        .map(|row| row.iter().map(|v| 1 - v).collect())
        .collect();
    let conv = |src: &Vec<Vec<i64>>, i: usize, j: usize| -> i64 {
        let mut acc = 0;
        for r in 0..side {
            for c in 0..side {
                acc += kernel(r, c) * src[i + r][j + c];
            }
        }
        acc
    };
    BinaryMask::from_fn(h, w, |i, j| {
        conv(&padded, i, j) > 0 || conv(&reversed, i, j) > 0
    })
    .unwrap()
}

/// Bilinear sample of `f` (h x w) at index coordinate (y, x), neighbors clamped.
pub fn bilinear_at(f: &dyn Fn(usize, usize) -> f64, h: usize, w: usize, y: f64, x: f64) -> f64 {
    let clamp = |v: f64, n: usize| v.max(0.0).min((n - 1) as f64);
    let (y, x) = (clamp(y, h), clamp(x, w));
    let (yf, xf) = (y.floor(), x.floor());
    let (ty, tx) = (y - yf, x - xf);
    let (y0, x0) = (yf as usize, xf as usize);
    let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
    (1.0 - ty) * (1.0 - tx) * f(y0, x0)
        + (1.0 - ty) * tx * f(y0, x1)
        + ty * (1.0 - tx) * f(y1, x0)
        + ty * tx * f(y1, x1)
}

pub fn brute_upsample(m: &ProbMask) -> Vec<Vec<f64>> {
    let (h, w) = m.dims();
    let f = |i: usize, j: usize| m.get(i, j);
    (0..2 * h)
        .map(|i| {
            (0..2 * w)
                .map(|j| {
                    bilinear_at(
                        &f,
                        h,
                        w,
                        (i as f64 + 0.5) / 2.0 - 0.5,
                        (j as f64 + 0.5) / 2.0 - 0.5,
                    )
                })
                .collect()
        })
        .collect()
}

pub fn brute_bce(preds: &[ProbMask], gts: &[BinaryMask], regions: &[BinaryMask]) -> f64 {
    let eps = 1e-7;
    let mut num = 0.0;
    let mut den = 0.0;
    for n in 0..preds.len() {
        for i in 0..preds[n].height() {
            for j in 0..preds[n].width() {
                let r = if regions[n].get(i, j) { 1.0 } else { 0.0 };
                let y = if gts[n].get(i, j) { 1.0 } else { 0.0 };
                let p = preds[n].get(i, j).max(eps).min(1.0 - eps);
                let l = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
                num += r * l;
                den += r;
            }
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Boundary F1 from explicit contour point lists.
pub fn brute_f1(gt: &BinaryMask, pred: &BinaryMask, n: usize) -> f64 {
    let gc = contour_points(gt);
    let pc = contour_points(pred);
    match (gc.is_empty(), pc.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let limit = (n as i64).pow(2);
    let hits = |from: &[(i64, i64)], to: &[(i64, i64)]| {
        from.iter()
            .filter(|&&(i, j)| min_sq_dist(to, i, j).unwrap() <= limit)
            .count() as f64
            / from.len() as f64
    };
    let p = hits(&pc, &gc);
    let r = hits(&gc, &pc);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// A random mask of the given size: noise, a union of disks and boxes, or a constant.
pub fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> BinaryMask {
    match rng.random_range(0..10) {
        0 => BinaryMask::zeros(h, w).unwrap(),
        1 => BinaryMask::ones(h, w).unwrap(),
        2 | 3 => {
            let density = rng.random_range(0.05..0.95);
            BinaryMask::from_fn(h, w, |_, _| rng.random_bool(density)).unwrap()
        }
        _ => {
            let shapes: Vec<(bool, f64, f64, f64, f64)> = (0..rng.random_range(1..4))
                .map(|_| {
                    (
                        rng.random_bool(0.5),
                        rng.random_range(0.0..h as f64),
                        rng.random_range(0.0..w as f64),
                        rng.random_range(0.5..(h.max(w) as f64 / 2.0).max(1.0)),
                        rng.random_range(0.5..(h.max(w) as f64 / 2.0).max(1.0)),
                    )
                })
                .collect();
            BinaryMask::from_fn(h, w, |i, j| {
                let (y, x) = (i as f64 + 0.5, j as f64 + 0.5);
                shapes.iter().any(|&(disk, cy, cx, ry, rx)| {
                    if disk {
                        ((y - cy) / ry).powi(2) + ((x - cx) / rx).powi(2) <= 1.0
                    } else {
                        (y - cy).abs() <= ry && (x - cx).abs() <= rx
                    }
                })
            })
            .unwrap()
        }
    }
}

pub fn random_prob(rng: &mut ChaCha8Rng, h: usize, w: usize) -> ProbMask {
    let data = (0..h * w)
        .map(|_| match rng.random_range(0..8) {
            0 => 0.0,
            1 => 1.0,
            2 => 0.5,
            _ => rng.random_range(0.0..=1.0),
        })
        .collect();
    ProbMask::from_vec(h, w, data).unwrap()
}
