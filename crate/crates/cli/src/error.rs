use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] bandwigner::Error),

    #[error("output encoding failed: {0}")]
    Encode(String),

    /// Verification ran to completion and at least one check failed.
    #[error("verification failed: {}", failed.join(", "))]
    Verification { failed: Vec<String> },
}

impl CliError {
    /// Process exit status: 1 usage, 2 numerical or I/O, 3 verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(bandwigner::Error::InvalidArgument(_) | bandwigner::Error::Domain { .. }) => 1,
            CliError::Core(_) | CliError::Io { .. } | CliError::Encode(_) => 2,
            CliError::Verification { .. } => 3,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
