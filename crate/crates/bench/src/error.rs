//! Harness errors and their exit codes.

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read config `{path}`: {source}")]
    ConfigIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse config `{path}`: {reason}")]
    ConfigParse { path: PathBuf, reason: String },

    /// The configuration parsed but describes an impossible experiment.
    #[error("invalid config: {0}")]
    Config(String),

    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed dataset `{path}`: {reason}")]
    Dataset { path: PathBuf, reason: String },

    #[error(transparent)]
    Solver(#[from] sinkhorn_dro::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// A verification check did not pass.
    #[error("verification failed: {0}")]
    Verification(String),
}

impl HarnessError {
    /// `1` for configuration problems, `2` for solver or verification failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::ConfigIo { .. }
            | HarnessError::ConfigParse { .. }
            | HarnessError::Config(_)
            | HarnessError::Dataset { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
