use std::path::PathBuf;

use thiserror::Error;

/// Errors produced while building, solving, or (de)serializing models.
#[derive(Debug, Error)]
pub enum Error {
    /// The conservation matrix does not have rank `n - 1`.
    #[error("conservation matrix has rank {found}, expected {expected}")]
    Rank { expected: usize, found: usize },

    /// A turning ratio or street reference does not match the network topology.
    #[error("topology error: {0}")]
    Topology(String),

    /// The reduced least-squares system is numerically singular.
    #[error("reduced flow system is singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    /// Cell interiors overlap along a street.
    #[error("street {street}: cells overlap over {overlap} km of its {length} km")]
    Overlap { street: usize, overlap: f64, length: f64 },

    /// A base station is not fed by any generator.
    #[error("base station {bs} is not connected to any generator")]
    Disconnected { bs: usize },

    /// No power line joins the generator and the base station.
    #[error("no power line between generator {generator} and base station {bs}")]
    NoLine { generator: usize, bs: usize },

    /// An attack strategy violates the stealth constraints of its level.
    #[error("infeasible attack: {0}")]
    Infeasible(String),

    /// A precondition on the inputs does not hold.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A scenario or config file could not be parsed.
    #[error("format error at `{path}`: {message}")]
    Format { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
