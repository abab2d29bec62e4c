use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("alpha = {alpha} is marginally stable; no isolated fixed point exists")]
    MarginalStability { alpha: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("degenerate design: predictor has zero variance")]
    DegenerateDesign,

    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("insufficient data: need at least {needed} records, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("insufficient steps: need at least 3 distinct revision steps, got {got}")]
    InsufficientSteps { got: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad inputs or parameters, as opposed to IO.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Csv(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
