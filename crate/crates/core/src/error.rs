use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed raster {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("unknown dtype code {0}")]
    UnknownDType(u8),

    #[error("value {value} cannot be stored losslessly as {dtype}")]
    Unrepresentable { value: f64, dtype: &'static str },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("invalid tile layout: {0}")]
    InvalidLayout(String),

    #[error("label space exhausted while making labels globally unique")]
    LabelOverflow,

    #[error("label {0} is not reachable from the DEM edge in the spillover graph")]
    UnreachableLabel(u32),

    #[error("malformed message: {0}")]
    Codec(String),

    #[error("worker failed on tile ({row},{col}): {message}")]
    Worker {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
