use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CollectionError {
    #[error("invalid problem {id}: {reason}")]
    InvalidProblem { id: String, reason: String },

    #[error("invalid protocol configuration: {0}")]
    Config(String),

    #[error("environment variable {0} holding the API token is not set")]
    MissingToken(String),

    /// The provider could not be reached or kept failing after retries.
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    /// A non-retryable HTTP status.
    #[error("provider rejected the request with status {status}: {body}")]
    Rejected { status: u16, body: String },

    #[error("could not read the provider response: {0}")]
    Response(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] alphalaw::Error),
}

impl CollectionError {
    /// Failures worth another attempt.
    pub fn is_retryable(&self) -> bool {
        matches!(self, CollectionError::Transport { .. })
    }

    /// Whether the failure came from talking to the provider or the
    /// filesystem rather than from bad input.
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            CollectionError::Transport { .. }
                | CollectionError::Rejected { .. }
                | CollectionError::Response(_)
                | CollectionError::MissingToken(_)
                | CollectionError::Io { .. }
        )
    }
}

pub type Result<T, E = CollectionError> = std::result::Result<T, E>;
