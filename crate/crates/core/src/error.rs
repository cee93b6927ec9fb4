use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input parameters (non-positive steps, mismatched objects, ...).
    #[error("invalid argument: {0}")]
    Argument(String),
    /// A query or window falls outside the region covered by a field or path.
    #[error("out of range: {0}")]
    Range(String),
    /// An estimator could not produce a result from the supplied samples.
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}

pub(crate) fn range<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Range(msg.into()))
}
