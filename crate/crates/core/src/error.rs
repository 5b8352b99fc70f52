//! Error type shared across the library.
//!
//! Every failure is assigned one of four categories so callers (notably the
//! CLI) can map errors onto distinct exit codes without inspecting messages.

use std::path::PathBuf;

/// Failure category, used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad input data or configuration (exit code 2).
    Input,
    /// Estimation failure: collinearity, insufficient sample, non-convergence (exit code 3).
    Estimation,
    /// Numerical failure: non-positive-definite covariance, zero row sum, NaN (exit code 4).
    Numerical,
    /// Filesystem failure (exit code 5).
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Input => 2,
            ErrorCategory::Estimation => 3,
            ErrorCategory::Numerical => 4,
            ErrorCategory::Io => 5,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Io,
            Error::Input(_) => ErrorCategory::Input,
            Error::Estimation(_) => ErrorCategory::Estimation,
            Error::Numerical(_) => ErrorCategory::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
