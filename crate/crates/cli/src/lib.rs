//! Library backing the `twoshock` binary: scenario configs, run
//! orchestration, and deterministic artifact emission.
//!
//! Everything the binary does is callable from here, so integration tests
//! drive the same code paths as the command line.

pub mod commands;
pub mod config;
pub mod observer;
pub mod output;
pub mod scenario;

use std::fmt;

use twoshock::{AnsatzError, EulerError, KineticError, ProfileError, SolverError};

/// Failure classes with distinct exit codes: config errors exit 2,
/// everything else exits 3.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or incomplete scenario file / flags.
    Config(String),
    /// A solver or construction step failed on valid input.
    Numerical(String),
    /// Filesystem trouble while reading configs or writing artifacts.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<EulerError> for CliError {
    fn from(e: EulerError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<ProfileError> for CliError {
    fn from(e: ProfileError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<AnsatzError> for CliError {
    fn from(e: AnsatzError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<KineticError> for CliError {
    fn from(e: KineticError) -> Self {
        CliError::Numerical(e.to_string())
    }
}
