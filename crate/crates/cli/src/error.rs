use std::fmt;

/// Failure of a CLI command, carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration (exit 1).
    Config(String),
    /// Unreadable or invalid input data (exit 2).
    Data(String),
    /// A sampler or factorization failed (exit 3).
    Numerical { module: &'static str, op: &'static str, detail: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical { module, op, detail } => write!(f, "numerical failure in {module}::{op}: {detail}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches the module and operation to a library error.
pub fn ctx(module: &'static str, op: &'static str) -> impl Fn(pgmult::Error) -> CliError {
    move |e| match e {
        pgmult::Error::Data(m) => CliError::Data(format!("{module}::{op}: {m}")),
        other => CliError::Numerical { module, op, detail: other.to_string() },
    }
}
