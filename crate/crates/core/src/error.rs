use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("descent diverged at iteration {iteration}: non-finite objective or gradient")]
    Divergence { iteration: usize },
    #[error("projection produced non-finite values")]
    Projection,
    #[error("support violation at index {index}: p is positive where q is zero")]
    Support { index: usize },
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("experiment failed: {0}")]
    Experiment(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
