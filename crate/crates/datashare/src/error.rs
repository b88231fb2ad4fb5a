use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Infeasible instance or a violated verdict.
    pub const VERDICT: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const INTERNAL: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or malformed input files.
    #[error("{0}")]
    Usage(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Internal(_) => exit::INTERNAL,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
