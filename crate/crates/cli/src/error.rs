use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<bcanneal::Error> for CliError {
    fn from(e: bcanneal::Error) -> Self {
        Self::Numerical(e.to_string())
    }
}

impl CliError {
    /// Wraps a core error raised while reading inputs.
    pub fn input(e: bcanneal::Error) -> Self {
        Self::Config(e.to_string())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Verification(_) => 4,
        })
    }
}
