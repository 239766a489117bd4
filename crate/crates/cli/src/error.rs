use std::process::ExitCode;

use thiserror::Error;

/// Failures split by exit code: bad input is 1, everything else is 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Runtime(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Self::Runtime(msg.into())
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Validation(_) => ExitCode::from(1),
            Self::Runtime(_) | Self::Io { .. } => ExitCode::from(2),
        }
    }
}

/// Library errors raised while checking a configuration or an input file.
impl From<privcusum::Error> for CliError {
    fn from(e: privcusum::Error) -> Self {
        Self::Validation(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
