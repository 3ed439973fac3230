use thiserror::Error;

/// Errors produced by the solvers, factorizations and file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("matrix is numerically singular ({0})")]
    Singular(String),

    #[error("matrix is rank deficient at column {column}")]
    RankDeficient { column: usize },

    #[error("operator is the zero matrix")]
    ZeroMatrix,

    #[error("operator is not symmetric positive definite ({0})")]
    NotSpd(String),

    #[error("missing data: {0}")]
    MissingData(&'static str),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported Matrix Market format: {0}")]
    UnsupportedFormat(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
