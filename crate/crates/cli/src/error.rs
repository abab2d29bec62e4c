use std::path::PathBuf;

use alphalaw_collector::CollectionError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] alphalaw::Error),

    #[error(transparent)]
    Collect(#[from] CollectionError),

    #[error("{0}")]
    Usage(String),

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} of {total} problems could not be collected")]
    Incomplete { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for bad input or usage, 2 for filesystem or transport trouble.
    pub fn exit_code(&self) -> i32 {
        let transport = match self {
            CliError::Core(e) => !e.is_validation(),
            CliError::Collect(CollectionError::Core(e)) => !e.is_validation(),
            CliError::Collect(e) => e.is_transport(),
            CliError::Usage(_) | CliError::Config { .. } => false,
            CliError::Io { .. } | CliError::Incomplete { .. } => true,
        };
        if transport {
            2
        } else {
            1
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
