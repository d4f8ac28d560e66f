//! Deterministic synthetic scenes of simple shapes, used as a desk-scale
//! stand-in for annotated instance masks.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::io::{Instance, SceneFile};
use crate::mask::BinaryMask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Disk,
    Rectangle,
    RotatedBar,
    Blob,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [
        ShapeKind::Disk,
        ShapeKind::Rectangle,
        ShapeKind::RotatedBar,
        ShapeKind::Blob,
    ];

    /// Category id written to scene files.
    pub fn category(self) -> u32 {
        match self {
            ShapeKind::Disk => 1,
            ShapeKind::Rectangle => 2,
            ShapeKind::RotatedBar => 3,
            ShapeKind::Blob => 4,
        }
    }
}

/// What a synthetic corpus contains.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeMix {
    pub height: usize,
    pub width: usize,
    /// Inclusive range of instances per scene.
    pub instances: (usize, usize),
    /// Inclusive range of shape extents in pixels.
    pub extent: (usize, usize),
    pub kinds: Vec<ShapeKind>,
    /// Inclusive bounds on the fraction of scene pixels covered by any instance.
    pub foreground: (f64, f64),
}

impl Default for ShapeMix {
    fn default() -> Self {
        Self {
            height: 256,
            width: 256,
            instances: (1, 4),
            extent: (16, 112),
            kinds: ShapeKind::ALL.to_vec(),
            foreground: (0.002, 0.6),
        }
    }
}

impl ShapeMix {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.kinds.is_empty() {
            return bad("shape mix needs at least one shape kind");
        }
        if self.instances.0 == 0 || self.instances.0 > self.instances.1 {
            return bad("instance range must satisfy 1 <= min <= max");
        }
        if self.extent.0 < 4 || self.extent.0 > self.extent.1 {
            return bad("extent range must satisfy 4 <= min <= max");
        }
        if self.extent.1 + 2 > self.height.min(self.width) {
            return bad("image must be at least max extent + 2 on each side");
        }
        let (lo, hi) = self.foreground;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return bad("foreground bounds must satisfy 0 <= lo <= hi <= 1");
        }
        Ok(())
    }
}

const MAX_ATTEMPTS: usize = 1000;

/// Rasterizes one shape of the given kind and extent centered at `(cy, cx)`.
fn rasterize(
    rng: &mut ChaCha8Rng,
    kind: ShapeKind,
    extent: f64,
    center: (f64, f64),
    height: usize,
    width: usize,
) -> BinaryMask {
    let half = extent / 2.0;
    let inside: Box<dyn Fn(f64, f64) -> bool> = match kind {
        ShapeKind::Disk => Box::new(move |dy, dx| dy * dy + dx * dx <= half * half),
        ShapeKind::Rectangle => {
            let short = half * rng.random_range(0.4..=1.0);
            let (hy, hx) = if rng.random_bool(0.5) {
                (half, short)
            } else {
                (short, half)
            };
            Box::new(move |dy: f64, dx: f64| dy.abs() <= hy && dx.abs() <= hx)
        }
        ShapeKind::RotatedBar => {
            let thickness = extent * rng.random_range(0.15..=0.35);
            let angle = rng.random_range(0.0..PI);
            let (sin, cos) = angle.sin_cos();
            Box::new(move |dy: f64, dx: f64| {
                let along = dx * cos + dy * sin;
                let across = -dx * sin + dy * cos;
                along.abs() <= half && across.abs() <= thickness / 2.0
            })
        }
        ShapeKind::Blob => {
            let harmonics: Vec<(f64, f64, f64)> = (2..=4)
                .map(|k| {
                    (
                        f64::from(k),
                        rng.random_range(0.0..0.15),
                        rng.random_range(0.0..2.0 * PI),
                    )
                })
                .collect();
            let total: f64 = harmonics.iter().map(|h| h.1).sum();
            let base = half / (1.0 + total);
            Box::new(move |dy: f64, dx: f64| {
                let angle = dy.atan2(dx);
                let radius = base
                    * (1.0
                        + harmonics
                            .iter()
                            .map(|&(k, a, phase)| a * (k * angle + phase).cos())
                            .sum::<f64>());
                dy * dy + dx * dx <= radius * radius
            })
        }
    };
    let (cy, cx) = center;
    BinaryMask::from_fn(height, width, |i, j| {
        let dy = i as f64 + 0.5 - cy;
        let dx = j as f64 + 0.5 - cx;
        dy.abs() <= half + 1.0 && dx.abs() <= half + 1.0 && inside(dy, dx)
    })
    .expect("validated image size")
}

fn sample_scene(rng: &mut ChaCha8Rng, mix: &ShapeMix) -> Vec<(ShapeKind, BinaryMask)> {
    let count = rng.random_range(mix.instances.0..=mix.instances.1);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let kind = mix.kinds[rng.random_range(0..mix.kinds.len())];
        let extent = rng.random_range(mix.extent.0 as f64..=mix.extent.1 as f64);
        let margin = extent / 2.0 + 1.0;
        let cy = rng.random_range(margin..=mix.height as f64 - margin);
        let cx = rng.random_range(margin..=mix.width as f64 - margin);
        let mask = rasterize(rng, kind, extent, (cy, cx), mix.height, mix.width);
        if mask.any() {
            out.push((kind, mask));
        }
    }
    out
}

fn foreground_fraction(masks: &[(ShapeKind, BinaryMask)], pixels: usize) -> f64 {
    let mut union = vec![false; pixels];
    for (_, m) in masks {
        for (u, &v) in union.iter_mut().zip(m.as_slice()) {
            *u |= v != 0;
        }
    }
    union.iter().filter(|&&u| u).count() as f64 / pixels as f64
}

/// Generates `n_scenes` scenes. The same seed and mix always give the same corpus.
///
/// Scenes whose foreground fraction falls outside `mix.foreground` are redrawn.
pub fn synth_corpus(seed: u64, n_scenes: usize, mix: &ShapeMix) -> Result<Vec<SceneFile>> {
    if n_scenes == 0 {
        return Err(Error::InvalidParameter("n_scenes must be >= 1".into()));
    }
    mix.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = mix.height * mix.width;
    let mut scenes = Vec::with_capacity(n_scenes);
    let mut next_id = 1u64;
    for _ in 0..n_scenes {
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let candidate = sample_scene(&mut rng, mix);
            let frac = foreground_fraction(&candidate, pixels);
            if frac >= mix.foreground.0 && frac <= mix.foreground.1 {
                accepted = Some(candidate);
                break;
            }
        }
        let shapes = accepted.ok_or_else(|| {
            Error::InvalidParameter(format!(
                "no scene within foreground bounds {:?} after {MAX_ATTEMPTS} attempts",
                mix.foreground
            ))
        })?;
        let instances = shapes
            .into_iter()
            .map(|(kind, mask)| {
                let bbox = mask.tight_bbox().expect("non-empty shape");
                let inst = Instance::new(next_id, kind.category(), &mask, bbox, None);
                next_id += 1;
                inst
            })
            .collect();
        scenes.push(SceneFile {
            image_size: [mix.height, mix.width],
            instances,
        });
    }
    Ok(scenes)
}

/// Convenience: the decoded instance masks of a freshly generated corpus.
pub fn synth_masks(seed: u64, n_scenes: usize, mix: &ShapeMix) -> Result<Vec<BinaryMask>> {
    synth_corpus(seed, n_scenes, mix)?
        .iter()
        .flat_map(|s| s.instances.iter().map(Instance::decode))
        .collect()
}
