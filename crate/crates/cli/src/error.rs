use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or inconsistent configuration. Exit code 2.
    #[error("config: {0}")]
    Config(String),

    /// Another process holds the output directory.
    #[error("output directory is locked by {0}; remove it if no run is active")]
    Locked(PathBuf),

    #[error(transparent)]
    Core(#[from] clab_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code: 2 for anything the user must fix before rerunning,
    /// 1 for failures during the run itself.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Locked(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
