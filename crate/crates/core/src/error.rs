use thiserror::Error;

/// Errors raised anywhere in the factorization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: cannot split {rows} rows across {workers} workers")]
    InvalidPartition { workers: usize, rows: usize },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("training diverged at iteration {iteration}: objective is not finite")]
    Divergence { iteration: usize },

    #[error("tridiagonal system is numerically singular at row {row}")]
    SingularSystem { row: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(
    context: &'static str,
    expected: impl std::fmt::Display,
    found: impl std::fmt::Display,
) -> Error {
    Error::ShapeMismatch {
        context,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
