use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A participant row could not be read.
    #[error("row {row}: {message}")]
    Parse { row: u64, message: String },

    /// A participant record breaks the two-stage design rules.
    #[error("participant {id}: {message}")]
    Consistency { id: String, message: String },

    /// Aggregated counts violate a structural invariant.
    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    /// A numeric routine was called outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// Invalid scenario, study or sampler configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A study had too many failed replications.
    #[error("study failed: {0}")]
    Study(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by the run itself.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Consistency { .. } | Error::InvalidCounts(_) | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
