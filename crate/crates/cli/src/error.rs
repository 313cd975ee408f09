use roughpath::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Output(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::GridTooShort(_)
            | Error::NotIncreasing(_)
            | Error::NonFiniteTime(_)
            | Error::LengthMismatch { .. }
            | Error::Shape(_)
            | Error::InvalidParameter(_)
            | Error::ExponentTooSmall(_)
            | Error::Precondition(_)
            | Error::InsufficientGrid(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}
