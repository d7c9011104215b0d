use thiserror::Error;

#[derive(Debug, Error)]
pub enum BemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular evaluation at coincident points")]
    SingularEvaluation,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("mesh format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BemError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(BemError::InvalidArgument(msg.into()))
}
