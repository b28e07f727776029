use std::io;
use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("{path}:{line}: {reason}")]
    ConfigFile {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("compare: {0}")]
    Compare(String),

    #[error("gradient check failed for {problem}: {params} exceeded tolerance {tolerance:e} (max relative error {max_error:e})")]
    GradCheckFailed {
        problem: String,
        params: String,
        tolerance: f64,
        max_error: f64,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Core(#[from] came_core::Error),
}

impl BenchError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        BenchError::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        BenchError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BenchError::InvalidConfig { .. } => "invalid_config",
            BenchError::UnknownKey(_) => "unknown_key",
            BenchError::ConfigFile { .. } => "config_file",
            BenchError::Compare(_) => "compare",
            BenchError::GradCheckFailed { .. } => "grad_check_failed",
            BenchError::Io { .. } => "io",
            BenchError::Core(came_core::Error::InvalidConfig { .. }) => "invalid_config",
            BenchError::Core(
                came_core::Error::ManifestParse { .. }
                | came_core::Error::EmptyManifest
                | came_core::Error::UnsupportedRank(_),
            ) => "manifest",
            BenchError::Core(_) => "numerical",
        }
    }

    /// Machine-readable form printed on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let mut obj = json!({
            "kind": self.kind(),
            "message": self.to_string(),
        });
        match self {
            BenchError::InvalidConfig { field, .. } => {
                obj["field"] = json!(field);
            }
            BenchError::Core(came_core::Error::InvalidConfig { field, .. }) => {
                obj["field"] = json!(field);
            }
            BenchError::GradCheckFailed { params, .. } => {
                obj["params"] = json!(params);
            }
            _ => {}
        }
        json!({ "error": obj })
    }
}
