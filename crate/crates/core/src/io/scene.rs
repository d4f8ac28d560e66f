use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::io::rle::{rle_decode, rle_encode, RleMask};
use crate::io::write_atomic;
use crate::mask::{BBox, BinaryMask};

/// Decimal places kept for real-valued fields on output.
const DECIMALS: f64 = 1e6;

fn round6(v: f64) -> f64 {
    (v * DECIMALS).round() / DECIMALS
}

fn ser_bbox<S: Serializer>(b: &[f64; 4], s: S) -> std::result::Result<S::Ok, S::Error> {
    b.map(round6).serialize(s)
}

fn ser_score<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.map(round6).serialize(s)
}

/// One annotated or predicted instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub id: u64,
    pub category: u32,
    /// `[x0, y0, x1, y1]` in continuous image coordinates.
    #[serde(serialize_with = "ser_bbox")]
    pub bbox: [f64; 4],
    pub mask: RleMask,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser_score"
    )]
    pub score: Option<f64>,
}

impl Instance {
    pub fn new(id: u64, category: u32, mask: &BinaryMask, bbox: BBox, score: Option<f64>) -> Self {
        Self {
            id,
            category,
            bbox: [bbox.x0, bbox.y0, bbox.x1, bbox.y1],
            mask: rle_encode(mask),
            score,
        }
    }

    pub fn bbox(&self) -> Result<BBox> {
        let [x0, y0, x1, y1] = self.bbox;
        BBox::new(x0, y0, x1, y1)
    }

    pub fn decode(&self) -> Result<BinaryMask> {
        rle_decode(&self.mask)
    }
}

/// All instances of one image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    /// `[height, width]`.
    pub image_size: [usize; 2],
    pub instances: Vec<Instance>,
}

impl SceneFile {
    /// Checks that every instance mask decodes to `image_size`.
    pub fn validate(&self) -> Result<()> {
        for inst in &self.instances {
            if inst.mask.size != self.image_size {
                return Err(Error::Data(format!(
                    "instance {}: mask size {:?} differs from image size {:?}",
                    inst.id, inst.mask.size, self.image_size
                )));
            }
            inst.decode()?;
        }
        Ok(())
    }

    /// Canonical serialized form: compact JSON followed by a newline.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec(self).expect("scene serialization is infallible");
        bytes.push(b'\n');
        bytes
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let scene: SceneFile = serde_json::from_slice(bytes).map_err(|e| Error::json(origin, e))?;
        scene
            .validate()
            .map_err(|e| Error::Data(format!("{}: {e}", origin.display())))?;
        Ok(scene)
    }
}

pub fn read_scene(path: &Path) -> Result<SceneFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    SceneFile::from_bytes(&bytes, path)
}

pub fn write_scene(path: &Path, scene: &SceneFile) -> Result<()> {
    write_atomic(path, &scene.to_bytes())
}

/// Directory index of scene files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub scenes: Vec<String>,
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let mut bytes =
        serde_json::to_vec_pretty(manifest).expect("manifest serialization is infallible");
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
