use std::fmt;

/// Failure classes, each mapped to a distinct process exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numerical(String),
    Io(String),
    SelftestFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::SelftestFailed => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::SelftestFailed => write!(f, "selftest failed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<pppks::Error> for CliError {
    fn from(e: pppks::Error) -> Self {
        use pppks::Error as E;
        match e {
            E::InvalidConfig(_) => CliError::Config(e.to_string()),
            E::DegenerateData(_) | E::LengthMismatch { .. } => CliError::Data(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
