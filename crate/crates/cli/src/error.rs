use std::fmt;

use maser_bloch_core::Error as CoreError;

/// Process exit status for each failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config = 2,
    Numerical = 3,
    Analysis = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Config,
            message: message.into(),
        }
    }

    pub fn analysis(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Analysis,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Numerical,
            message: message.into(),
        }
    }

    pub fn code(&self) -> u8 {
        self.kind as u8
    }

    /// Classifies an error raised while running a simulation.
    pub fn from_run(e: CoreError) -> Self {
        if e.is_numerical() {
            Self::numerical(e.to_string())
        } else {
            Self::config(e.to_string())
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_error(what: &str, path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::config(format!("{what} {}: {e}", path.display()))
}
