use std::path::Path;

use thiserror::Error;

/// Failure of a run, mapped to a process exit code.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Schema(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Schema(_) => 1,
            RunError::Precondition(_) => 2,
            RunError::Io(_) => 3,
        }
    }

    pub(crate) fn read(path: &Path, e: std::io::Error) -> Self {
        RunError::Schema(format!("cannot read {}: {e}", path.display()))
    }

    pub(crate) fn write(path: &Path, e: impl std::fmt::Display) -> Self {
        RunError::Io(format!("cannot write {}: {e}", path.display()))
    }
}

impl From<slowvary_core::Error> for RunError {
    fn from(e: slowvary_core::Error) -> Self {
        RunError::Precondition(e.to_string())
    }
}

pub type RunResult<T> = Result<T, RunError>;
