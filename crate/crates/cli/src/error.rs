use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Core(#[from] kpzlab::Error),
}

impl CliError {
    /// 1 when an estimator could not produce a result, 2 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(kpzlab::Error::Estimation(_)) => 1,
            _ => 2,
        }
    }
}

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}
