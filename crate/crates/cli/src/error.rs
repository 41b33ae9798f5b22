use std::fmt;

/// Failure of a CLI command, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable file, malformed CSV or config, invalid parameters. Exit 2.
    Input(String),
    /// A fit ran but did not converge. Exit 3.
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::NotConverged(_) => 3,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "error: {m}"),
            CliError::NotConverged(m) => write!(f, "fit did not converge: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<relaxkit::Error> for CliError {
    fn from(e: relaxkit::Error) -> Self {
        match e {
            relaxkit::Error::Input(m) => CliError::Input(m),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
