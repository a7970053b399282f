use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum CalibError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("optimization failed after {iterations} iterations: {message}")]
    Optimization { iterations: usize, message: String },

    #[error("degenerate noise level: {0}")]
    DegenerateNoise(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CalibError>;
