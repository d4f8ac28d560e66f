//! Plain-text portable bitmap (P1) output for eyeballing masks.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::io::write_atomic;
use crate::mask::BinaryMask;

pub fn to_pbm(m: &BinaryMask) -> String {
    let mut out = format!("P1\n{} {}\n", m.width(), m.height());
    for row in m.as_slice().chunks(m.width()) {
        let mut first = true;
        for &v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_pbm(m: &BinaryMask, path: &Path) -> Result<()> {
    write_atomic(path, to_pbm(m).as_bytes())
}
