use std::fmt;
use std::path::Path;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config values or config file contents. Exit 1.
    Usage(String),
    /// Unreadable, malformed or mutually inconsistent input data. Exit 2.
    Data(String),
    /// A broken internal invariant, such as a non-finite loss. Exit 3.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    /// Wraps a library error raised while handling `path`.
    pub fn at(path: &Path, err: blstm_core::Error) -> Self {
        CliError::from(err).prefixed(&path.display().to_string())
    }

    fn prefixed(self, prefix: &str) -> Self {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{prefix}: {m}")),
            CliError::Data(m) if m.starts_with(prefix) => CliError::Data(m),
            CliError::Data(m) => CliError::Data(format!("{prefix}: {m}")),
            CliError::Internal(m) => CliError::Internal(format!("{prefix}: {m}")),
        }
    }
}

impl From<blstm_core::Error> for CliError {
    fn from(err: blstm_core::Error) -> Self {
        match err {
            blstm_core::Error::NonFinite(_) => CliError::Internal(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;
