use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SpcaError>;

/// Every failure the library can report.
///
/// Variants are grouped by how a caller should react: [`SpcaError::Parameter`]
/// is a bad argument, the numerical/construction family means the inputs were
/// well-formed but the computation could not certify its result, and the I/O
/// family covers files and formats.
#[derive(Debug, Error)]
pub enum SpcaError {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("numerical error: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("instance error: {0}")]
    Instance(String),

    #[error("deflation failure: {0}")]
    Deflation(String),

    #[error("certificate `{name}` failed: measured {measured}, required {required}")]
    Certificate {
        name: String,
        measured: f64,
        required: String,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error classes, used by the command-line front end for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Parameter,
    Numerical,
    Io,
}

impl SpcaError {
    pub fn param(msg: impl Into<String>) -> Self {
        SpcaError::Parameter(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SpcaError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            SpcaError::Parameter(_) => ErrorClass::Parameter,
            SpcaError::Numerical { .. }
            | SpcaError::Degenerate(_)
            | SpcaError::Construction(_)
            | SpcaError::Instance(_)
            | SpcaError::Deflation(_)
            | SpcaError::Certificate { .. } => ErrorClass::Numerical,
            SpcaError::Parse { .. } | SpcaError::Format(_) | SpcaError::Io { .. } => {
                ErrorClass::Io
            }
        }
    }

    /// Prefixes the message with `context`, keeping the variant (and so the class).
    pub fn context(self, context: &str) -> Self {
        match self {
            SpcaError::Parameter(m) => SpcaError::Parameter(format!("{context}: {m}")),
            SpcaError::Degenerate(m) => SpcaError::Degenerate(format!("{context}: {m}")),
            SpcaError::Construction(m) => SpcaError::Construction(format!("{context}: {m}")),
            SpcaError::Instance(m) => SpcaError::Instance(format!("{context}: {m}")),
            SpcaError::Deflation(m) => SpcaError::Deflation(format!("{context}: {m}")),
            SpcaError::Numerical { message, residual } => SpcaError::Numerical {
                message: format!("{context}: {message}"),
                residual,
            },
            other => other,
        }
    }
}
