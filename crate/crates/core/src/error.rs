use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Returned when tensor shapes or paired contraction axes disagree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Returned when chain lengths or physical dimensions disagree.
    #[error("incompatible operands: {0}")]
    Incompatible(String),

    /// Returned when an argument violates a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Returned when a dense oracle or simulator would exceed its size cap.
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// Returned when an iterative routine produced NaN or infinite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Returned when a linear system could not be solved.
    #[error("solver failure: {0}")]
    Solver(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
