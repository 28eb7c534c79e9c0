use std::io;
use std::path::PathBuf;

use histograde::{DataError, Error, FormatError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file, or paths that do not exist.
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Data(#[from] DataError),
    /// Dataset or model content that cannot be used as given.
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    /// 1 configuration, 2 data or format, 3 numeric abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 1,
            CliError::Format(_) | CliError::Data(_) | CliError::Invalid(_) => 2,
            CliError::Core(Error::NonFiniteLoss { .. } | Error::NonFinite { .. }) => 3,
            CliError::Core(Error::Config(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Format(f) => CliError::Format(f),
            Error::Data(d) => CliError::Data(d),
            other => CliError::Core(other),
        }
    }
}
