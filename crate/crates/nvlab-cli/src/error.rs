use nvlab::NvError;

/// Failure of a CLI run, mapped to an exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, configuration or module preconditions.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] NvError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Lib(e) => match e {
                NvError::NonConverged { .. } | NvError::NanDetected { .. } | NvError::Resolution(_) => 2,
                _ => 1,
            },
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
