use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Schema(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("{0}")]
    OverCap(String),

    #[error("{0}")]
    Numerical(String),

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::OverCap(_) => 4,
            CliError::Numerical(_) => 5,
            CliError::Other(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Schema(_) => "schema",
            CliError::MissingInput(_) => "missing_input",
            CliError::OverCap(_) => "over_cap",
            CliError::Numerical(_) => "numerical",
            CliError::Other(_) => "other",
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() })
    }
}

impl From<hcut::Error> for CliError {
    fn from(e: hcut::Error) -> Self {
        use hcut::Error as E;
        match e {
            E::InvalidArgument(_) => CliError::Schema(e.to_string()),
            E::OverCap { .. } => CliError::OverCap(e.to_string()),
            E::Numerical { .. } | E::OutsideBox { .. } | E::Degenerate(_) => CliError::Numerical(e.to_string()),
            E::Io(io) if io.kind() == std::io::ErrorKind::NotFound => CliError::MissingInput(io.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
