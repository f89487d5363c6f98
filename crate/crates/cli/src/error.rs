use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<jmmd::Error> for CliError {
    fn from(e: jmmd::Error) -> Self {
        use jmmd::Error as E;
        let msg = e.to_string();
        match e {
            E::Argument(_) | E::Unsupported { .. } => CliError::Usage(msg),
            E::Data { .. } | E::Dimension(_) => CliError::Data(msg),
            _ => CliError::Numerical(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(format!("invalid JSON: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
