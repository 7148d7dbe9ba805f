use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("brute-force cap exceeded: {n} points (cap {cap})")]
    CapExceeded { n: usize, cap: usize },

    #[error("label {label} out of range for {labels} labels")]
    LabelOutOfRange { label: usize, labels: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("empty band: ground truth has no label boundaries")]
    EmptyBand,

    #[error("bad magic")]
    BadMagic,

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("truncated payload")]
    TruncatedPayload,

    #[error("unsupported format: {0}")]
    Unsupported(String),

    #[error("palette too small: {have} entries for {need} labels")]
    PaletteTooSmall { have: usize, need: usize },

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("png: {0}")]
    Png(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
