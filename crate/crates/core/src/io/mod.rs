//! File plumbing: RLE codec, scene files, directory manifests and debug bitmaps.

mod pbm;
mod rle;
mod scene;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub use pbm::{to_pbm, write_pbm};
pub use rle::{rle_decode, rle_encode, RleMask};
pub use scene::{
    read_manifest, read_scene, write_manifest, write_scene, Instance, Manifest, SceneFile,
};

/// Name of the optional directory manifest.
pub const MANIFEST_NAME: &str = "manifest.json";

/// Writes through a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Scene files under `path`: the file itself, or for a directory the entries
/// listed in its manifest (falling back to every `*.json` except the manifest),
/// sorted by name.
pub fn list_scene_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
            ));
        }
        return Ok(vec![path.to_path_buf()]);
    }
    let manifest = path.join(MANIFEST_NAME);
    let mut files = if manifest.is_file() {
        read_manifest(&manifest)?
            .scenes
            .into_iter()
            .map(|name| path.join(name))
            .collect()
    } else {
        let mut files = Vec::new();
        for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
            let p = entry.map_err(|e| Error::io(path, e))?.path();
            let is_json = p.extension().is_some_and(|e| e == "json");
            if is_json && p.file_name().is_some_and(|n| n != MANIFEST_NAME) {
                files.push(p);
            }
        }
        files
    };
    files.sort();
    Ok(files)
}

/// Creates `dir` (and parents) if missing.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
