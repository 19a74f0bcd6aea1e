use std::fmt;
use std::path::PathBuf;

/// Failure of a command, classified for the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or malformed input file. Exit code 2.
    Config(String),
    /// The computation itself failed. Exit code 3.
    Numeric(dynlens_core::Error),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(e) => write!(f, "numeric failure: {e}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

impl From<dynlens_core::Error> for CliError {
    fn from(e: dynlens_core::Error) -> Self {
        CliError::Numeric(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Validation failures of a freshly parsed config are configuration errors.
pub fn invalid_config(e: dynlens_core::Error) -> CliError {
    CliError::Config(e.to_string())
}
