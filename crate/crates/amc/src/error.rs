use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = AmcError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AmcError {
    #[error(transparent)]
    Core(#[from] amc_core::Error),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("invalid data: {0}")]
    Data(String),
    #[error("checkpoint {0} has no score weights; run calibration (amc train) before patch scoring")]
    Uncalibrated(PathBuf),
    #[error("checkpoint {path} does not match the configured model: {msg}")]
    Incompatible { path: PathBuf, msg: String },
}

impl AmcError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        AmcError::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, msg: impl ToString) -> Self {
        AmcError::Format { path: path.to_path_buf(), msg: msg.to_string() }
    }

    /// Process exit code: 2 bad config, 3 missing or invalid data, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        use amc_core::Error as E;
        match self {
            AmcError::Config(_) | AmcError::Incompatible { .. } | AmcError::Core(E::Config(_)) => 2,
            AmcError::Core(E::NonFinite { .. } | E::DegenerateCalibration { .. }) => 4,
            _ => 3,
        }
    }
}
