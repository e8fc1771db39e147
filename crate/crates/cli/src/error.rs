use std::path::PathBuf;

use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message} (at `{key}`)")]
    Config {
        path: PathBuf,
        /// Dotted location of the offending key, `.` for the document root.
        key: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, row {row}: {message}")]
    Dataset {
        path: PathBuf,
        /// 1-based line number in the file, header included.
        row: u64,
        message: String,
    },
    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] defer_lab_core::Error),
    #[error("verification failed: {}", failed.join(", "))]
    VerificationFailed { failed: Vec<String> },
    #[error("{0}")]
    Environment(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Invalid(_) => "invalid_config",
            CliError::Io { .. } => "io",
            CliError::Dataset { .. } => "dataset",
            CliError::Artifact { .. } => "artifact",
            CliError::Core(e) => e.kind(),
            CliError::VerificationFailed { .. } => "verification_failed",
            CliError::Environment(_) => "environment",
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> Value {
        let mut body = json!({"kind": self.kind(), "message": self.to_string()});
        match self {
            CliError::Config { path, key, .. } => {
                body["path"] = json!(path);
                body["key"] = json!(key);
            }
            CliError::Io { path, .. } | CliError::Artifact { path, .. } => {
                body["path"] = json!(path);
            }
            CliError::Dataset { path, row, .. } => {
                body["path"] = json!(path);
                body["row"] = json!(row);
            }
            CliError::VerificationFailed { failed } => body["failed_checks"] = json!(failed),
            _ => {}
        }
        json!({ "error": body })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
