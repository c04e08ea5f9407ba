use std::path::PathBuf;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::dynamics::DynamicsError;
use crate::field::FieldError;
use crate::geometry::GeometryError;
use crate::waveform::WaveformError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }

    /// True for errors caused by the caller's configuration or inputs rather
    /// than by a numerical failure during computation.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Invalid(_) | Error::Io { .. } | Error::Format { .. } => true,
            Error::Geometry(e) => e.is_config(),
            Error::Field(e) => e.is_config(),
            Error::Analysis(e) => e.is_config(),
            Error::Dynamics(e) => e.is_config(),
            Error::Waveform(e) => e.is_config(),
        }
    }
}
