use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use sicf_core::Error;

/// A failed command, classified by the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or flags; exit status 2.
    Config(String),
    /// A referenced input file does not exist; exit status 3.
    MissingInput(PathBuf),
    /// An internal invariant was violated; exit status 4.
    Invariant(String),
    /// Any other failure (malformed data, I/O); exit status 1.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }

    pub fn config(field: &str, message: impl fmt::Display) -> Self {
        CliError::Config(format!("{field}: {message}"))
    }

    pub fn io(path: &Path, err: io::Error) -> Self {
        if err.kind() == io::ErrorKind::NotFound {
            CliError::MissingInput(path.to_path_buf())
        } else {
            CliError::Failed(format!("{}: {err}", path.display()))
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::MissingInput(p) => write!(f, "missing input file: {}", p.display()),
            CliError::Invariant(m) => write!(f, "internal invariant violated: {m}"),
            CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        match err {
            Error::Io { path, source } => CliError::io(&path, source),
            Error::Invariant(m) => CliError::Invariant(m),
            other => CliError::Failed(other.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
