use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Sampler(#[from] nurs::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            // bad model or kernel parameters are input errors too
            CliError::Sampler(
                nurs::Error::InvalidParameter { .. }
                | nurs::Error::NotSymmetric { .. }
                | nurs::Error::NotPositiveDefinite { .. }
                | nurs::Error::BadShape { .. }
                | nurs::Error::EmptyFunnel
                | nurs::Error::DimensionMismatch { .. }
                | nurs::Error::EnumerationTooLarge { .. },
            ) => 2,
            _ => 1,
        }
    }
}

pub fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
