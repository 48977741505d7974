use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const PASS: u8 = 0;
    pub const PROPERTY_FAILURE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const INVARIANT: u8 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },

    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: io::Error },

    #[error("malformed tensor file: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    Invariant(natcon::Error),

    #[error("failing properties: {}", .0.join(", "))]
    PropertyFailure(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Read { .. } | CliError::Parse(_) => exit::USAGE,
            CliError::Write { .. } => exit::USAGE,
            CliError::Invariant(_) => exit::INVARIANT,
            CliError::PropertyFailure(_) => exit::PROPERTY_FAILURE,
        }
    }
}

impl From<natcon::Error> for CliError {
    /// Shape and parameter problems are usage errors; violated mathematical
    /// invariants of otherwise well-formed input are invariant errors.
    fn from(e: natcon::Error) -> Self {
        use natcon::Error as E;
        match e {
            E::InvalidDimension(_)
            | E::DimensionMismatch { .. }
            | E::NotSquare { .. }
            | E::Chart(_)
            | E::InvalidParameter(_) => CliError::Usage(e.to_string()),
            _ => CliError::Invariant(e),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
