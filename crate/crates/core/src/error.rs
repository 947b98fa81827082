//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the CLI exit codes: configuration and argument
/// problems exit with 2, numerical/solver failures with 3, and I/O or
/// data-format problems with 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("incomplete epoch k={k}: {msg}")]
    IncompleteEpoch { k: usize, msg: String },

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("LMI feasibility not certified (best margin {best_margin:.3e})")]
    Infeasible { best_margin: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => 2,
            Error::DegenerateGeometry(_) | Error::Numerical(_) | Error::Infeasible { .. } => 3,
            Error::IncompleteEpoch { .. } | Error::Parse { .. } | Error::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
