use std::fmt;

/// A failed command and the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments; exit code 2.
    Config(String),
    /// Unreadable or inconsistent input data; exit code 3.
    Data(String),
    /// Training produced non-finite values; exit code 4.
    Divergence(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Divergence(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Data(m) => write!(f, "data error: {m}"),
            Self::Divergence(m) => write!(f, "numerical divergence: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<graphlp::Error> for CliError {
    fn from(e: graphlp::Error) -> Self {
        use graphlp::Error as E;
        match e {
            E::Diverged { .. } | E::NonFinite { .. } | E::NotPositiveDefinite { .. } => Self::Divergence(e.to_string()),
            E::InvalidArgument(_) => Self::Config(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Config(e.to_string())
    }
}

/// Attaches the offending path to an I/O error.
pub fn io_error(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}
