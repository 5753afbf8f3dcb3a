//! Error type of the harness: core failures plus IO and format problems.

use std::path::PathBuf;

pub type Result<T, E = BatonError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum BatonError {
    #[error(transparent)]
    Core(#[from] baton_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    ConfigParse(#[from] toml::de::Error),
    #[error("config: {0}")]
    ConfigWrite(#[from] toml::ser::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    /// A file parsed but its content is not what the format requires.
    #[error("{0}")]
    Format(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

impl BatonError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
