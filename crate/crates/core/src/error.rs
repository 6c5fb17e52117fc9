//! Error types shared across the library.

use std::path::PathBuf;

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument fell outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A method or run was configured inconsistently.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed input row.
    #[error("{path}:{line}: parse error: {message}")]
    Parse { path: String, line: u64, message: String },

    /// Input parsed but violated a data rule (sign, alignment to hours).
    #[error("{path}:{line}: validation error: {message}")]
    Validation { path: String, line: u64, message: String },

    /// Two rows with the same key and different values.
    #[error("conflicting duplicate rows for {key}: {first} vs {second} MWh")]
    Conflict { key: String, first: f64, second: f64 },

    /// Unexpected gaps under a strict coverage policy.
    #[error("coverage error: {} unexpected gap(s), first: {}", .gaps.len(), .gaps.first().map(|g| g.to_string()).unwrap_or_default())]
    Coverage { gaps: Vec<crate::ingest::Gap> },

    /// Two series share no time bucket.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// The long-run variance is not strictly positive.
    #[error("degenerate variance: long-run variance is {0}, must be > 0")]
    DegenerateVariance(f64),

    /// Method 6 denominator is not strictly positive.
    #[error("degenerate baseline: weighted 2019 generation sum is {0}, must be > 0")]
    DegenerateBaseline(f64),

    #[error("I/O error on {path}: {source}")]
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
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::DegenerateVariance(_) => 4,
            _ => 3,
        }
    }
}
