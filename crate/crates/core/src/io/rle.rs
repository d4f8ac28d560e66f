//! Uncompressed COCO-style run-length encoding.
//!
//! Pixels are visited in column-major order and `counts` alternates runs of 0s
//! and 1s, always starting with a (possibly empty) run of 0s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RleMask {
    /// `[height, width]`.
    pub size: [usize; 2],
    /// Signed so that malformed input can be reported with its index.
    pub counts: Vec<i64>,
}

pub fn rle_encode(m: &BinaryMask) -> RleMask {
    let (h, w) = m.dims();
    let mut counts = Vec::new();
    let mut current = 0u8;
    let mut run = 0i64;
    for j in 0..w {
        for i in 0..h {
            let v = u8::from(m.get(i, j));
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    RleMask {
        size: [h, w],
        counts,
    }
}

pub fn rle_decode(r: &RleMask) -> Result<BinaryMask> {
    let [h, w] = r.size;
    let total = h * w;
    let mut col_major = Vec::with_capacity(total);
    let mut value = 0u8;
    for (index, &count) in r.counts.iter().enumerate() {
        if count < 0 {
            return Err(Error::Rle {
                index,
                reason: format!("negative run length {count}"),
            });
        }
        let count = count as usize;
        if col_major.len() + count > total {
            return Err(Error::Rle {
                index,
                reason: format!("runs exceed {h}x{w} = {total} pixels"),
            });
        }
        col_major.resize(col_major.len() + count, value);
        value ^= 1;
    }
    if col_major.len() != total {
        return Err(Error::Rle {
            index: r.counts.len(),
            reason: format!("counts sum to {}, expected {total}", col_major.len()),
        });
    }
    let mut data = vec![0u8; total];
    for j in 0..w {
        for i in 0..h {
            data[i * w + j] = col_major[j * h + i];
        }
    }
    BinaryMask::from_vec(h, w, data)
}
