use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("SVD did not converge ({context})")]
    SvdFailure { context: String },

    /// An SVD inside an iterative solver failed.
    #[error("numerical failure at iteration {iteration}: {source}")]
    Numerical {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("solver diverged at iteration {iteration} (non-finite residual)")]
    Divergence { iteration: usize },

    #[error("Neumann series does not converge: ||P_Omega P_Pi|| = {norm} >= 1")]
    NonConvergentSeries { norm: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Dimension(_) | Error::InvalidParameter(_) => ErrorClass::Usage,
            Error::SvdFailure { .. }
            | Error::Numerical { .. }
            | Error::Divergence { .. }
            | Error::NonConvergentSeries { .. } => ErrorClass::Numerical,
            Error::Io { .. } | Error::Parse { .. } => ErrorClass::Io,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}
