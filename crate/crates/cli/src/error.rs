use simplex_kde::io::IoError;
use simplex_kde::Error;
use thiserror::Error as ThisError;

/// Failure of a CLI run, grouped by exit code.
#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::BadResolution(_)
            | Error::BadTolerance { .. }
            | Error::InvalidBandwidth(_)
            | Error::InvalidParams(_)
            | Error::InvalidArgument(_) => CliError::Config(msg),
            Error::BoundaryPoint
            | Error::ZeroPhi
            | Error::NoConvergence { .. }
            | Error::EmptyGrid
            | Error::ZeroPropensityOnObserved { .. } => CliError::Numerical(msg),
            Error::NegativePart { .. }
            | Error::SumExceedsOne { .. }
            | Error::NonFinite { .. }
            | Error::AllZero
            | Error::LengthMismatch { .. }
            | Error::DimensionMismatch { .. }
            | Error::EmptySample
            | Error::NoObservedResponses
            | Error::TooFewObserved { .. }
            | Error::DegenerateData(_) => CliError::Data(msg),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Data(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
