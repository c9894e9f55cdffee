use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("enumeration too large: {unknowns} unknown labels exceeds the limit of {limit}")]
    EnumerationTooLarge { unknowns: usize, limit: usize },

    #[error("insufficient dataset: {size} samples but mixing needs at least {required}")]
    InsufficientDataset { size: usize, required: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("COCO ingestion failed: {0}")]
    Ingest(String),

    #[error("tensor format: {0}")]
    Format(String),

    #[error("image decode: {0}")]
    Image(#[from] image::ImageError),

    #[error("bench harness: {0}")]
    Harness(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
