use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HlopError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HlopError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: bad IDX magic number 0x{found:08x}, expected 0x{expected:08x}")]
    IdxMagic { path: PathBuf, found: u32, expected: u32 },

    #[error("{path}: truncated IDX payload ({found} bytes, expected {expected})")]
    IdxTruncated { path: PathBuf, found: usize, expected: usize },

    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    #[error("dataset file not found: {0}")]
    MissingData(PathBuf),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HlopError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        HlopError::Config { field: field.into(), message: message.into() }
    }
}
