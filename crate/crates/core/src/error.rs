use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mask dimensions must be at least 1x1, got {height}x{width}")]
    EmptyShape { height: usize, width: usize },

    #[error("buffer holds {found} values, expected {expected} for the declared shape")]
    BufferLength { expected: usize, found: usize },

    #[error("value {value} at index {index} is outside the allowed range")]
    ValueOutOfRange { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("degenerate bounding box [{x0}, {y0}, {x1}, {y1}]")]
    DegenerateBox { x0: f64, y0: f64, x1: f64, y1: f64 },

    #[error("bounding box does not intersect the {height}x{width} image")]
    BoxOutsideImage { height: usize, width: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stage {stage}: expected a {expected}x{expected} mask, found {found:?}")]
    StageSize {
        stage: usize,
        expected: usize,
        found: (usize, usize),
    },

    #[error("expected {expected} items, found {found}")]
    Arity { expected: usize, found: usize },

    #[error("malformed RLE at count index {index}: {reason}")]
    Rle { index: usize, reason: String },

    #[error("empty ground-truth corpus")]
    EmptyCorpus,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{0}")]
    Data(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
