use std::path::{Path, PathBuf};

use mqf_core::MqfError;
use thiserror::Error;

/// Failure of a command. The display form is `kind: message`.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("io: {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse: {0}")]
    Parse(String),
    #[error("config: {0}")]
    Config(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("estimation: {0}")]
    Core(#[from] MqfError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse_at(path: &Path, line: u64, msg: impl std::fmt::Display) -> Self {
        CliError::Parse(format!("{}: line {line}: {msg}", path.display()))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
