use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("validation failed: {0}")]
    Validation(String),

    /// Step-size or consistency failure inside the integrator.
    #[error("numerical failure at t = {time}: {message}")]
    Numerical { time: f64, message: String },

    #[error("infeasible record at step {step}: {message}")]
    InfeasibleRecord { step: usize, message: String },

    #[error("record exhausted after {0} steps")]
    RecordExhausted(usize),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub fn numerical(time: f64, message: impl Into<String>) -> Self {
        Error::Numerical {
            time,
            message: message.into(),
        }
    }

    /// Process exit code for the command-line contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } | Error::Resolution(_) => 3,
            Error::InfeasibleRecord { .. } => 4,
            _ => 2,
        }
    }
}
