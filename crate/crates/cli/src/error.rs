use std::path::Path;

use thiserror::Error;

/// Exit code for a successful run.
pub const EXIT_OK: u8 = 0;
/// Exit code for a numerical failure: singular system, aborted optimization,
/// failed audit or verification.
pub const EXIT_NUMERICAL: u8 = 1;
/// Exit code for bad input: config, missing or malformed files.
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),

    #[error("{0}")]
    Numerical(String),

    #[error(transparent)]
    Core(#[from] dhn_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Core(e) if e.is_input_error() => EXIT_INPUT,
            CliError::Core(_) => EXIT_NUMERICAL,
        }
    }

    pub(crate) fn write(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Input(format!("cannot write {}: {e}", path.display()))
    }
}

pub type CliResult<T> = Result<T, CliError>;
