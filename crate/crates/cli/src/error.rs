use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] erlang_rain::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Simulated and analytic values disagree.
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit status: 1 usage or input, 2 model cannot deliver, 3 validation failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Model(e) => match e {
                erlang_rain::Error::InvalidParameter(_) | erlang_rain::Error::Domain(_) => 1,
                _ => 2,
            },
            CliError::Validation(_) => 3,
        }
    }
}
