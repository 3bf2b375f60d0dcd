use thiserror::Error;

/// Failure of a whole command. Data problems exit with 1, configuration problems with 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Data(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

impl From<lsc_core::Error> for CliError {
    fn from(e: lsc_core::Error) -> Self {
        if e.is_data_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}
