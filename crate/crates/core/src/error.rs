use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("solver diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("malformed data: {0}")]
    Format(String),

    /// The io error is part of the message rather than a chained source,
    /// so that the path and the cause are reported together exactly once.
    #[error("{}: {cause}", path.display())]
    File { path: std::path::PathBuf, cause: std::io::Error },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
