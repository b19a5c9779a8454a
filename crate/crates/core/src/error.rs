use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every layer of the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("instance generation failed: {0}")]
    GenerationFailure(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("simulation diagnostic: {0}")]
    Diagnostic(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by user-supplied configuration rather than a
    /// failure during simulation.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidConfig(_) | Error::Parse(_))
    }

    /// Prefix the message with run context (seed, policy, ...).
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::InvalidDimension(m) => Error::InvalidDimension(format!("{ctx}: {m}")),
            Error::InsufficientSamples(m) => Error::InsufficientSamples(format!("{ctx}: {m}")),
            Error::NumericalDegeneracy(m) => Error::NumericalDegeneracy(format!("{ctx}: {m}")),
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{ctx}: {m}")),
            Error::GenerationFailure(m) => Error::GenerationFailure(format!("{ctx}: {m}")),
            Error::InvalidInstance(m) => Error::InvalidInstance(format!("{ctx}: {m}")),
            Error::DegenerateInstance(m) => Error::DegenerateInstance(format!("{ctx}: {m}")),
            Error::InvariantViolation(m) => Error::InvariantViolation(format!("{ctx}: {m}")),
            Error::Protocol(m) => Error::Protocol(format!("{ctx}: {m}")),
            Error::Diagnostic(m) => Error::Diagnostic(format!("{ctx}: {m}")),
            Error::Parse(m) => Error::Parse(format!("{ctx}: {m}")),
            io @ Error::Io { .. } => io,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
