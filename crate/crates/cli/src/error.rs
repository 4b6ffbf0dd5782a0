use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("solver instability: {0}")]
    Instability(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Instability(_) => 3,
            Self::Io(_) => 4,
        }
    }
}

impl From<malgpro::Error> for CliError {
    fn from(e: malgpro::Error) -> Self {
        use malgpro::Error as E;
        match e {
            E::InvalidArgument(_) | E::Configuration(_) | E::MissingDerivative(_) => Self::Validation(e.to_string()),
            _ => Self::Instability(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}
