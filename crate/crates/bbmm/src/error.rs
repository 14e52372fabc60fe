use thiserror::Error;

/// Errors surfaced by the linear algebra kernels, solvers, and model layer.
#[derive(Debug, Error)]
pub enum BbmmError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("operator appears indefinite: {0}")]
    IndefiniteOperator(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),
}

pub type Result<T> = std::result::Result<T, BbmmError>;

impl BbmmError {
    pub fn shape(msg: impl Into<String>) -> Self {
        BbmmError::Shape(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        BbmmError::Domain(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        BbmmError::Numeric(msg.into())
    }
}
