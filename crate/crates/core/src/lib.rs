//! Generalized coherent states of su(2), a latitude/longitude tessellation of
//! their phase space, the tile-discrimination POVM built on it, threshold
//! sizes for classical-like behaviour, and Monge distances between coherent
//! states.

pub mod config;
pub mod gcs;
pub mod geometry;
pub mod monge;
pub mod povm;
pub mod quadrature;
pub mod threshold;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Gcs(#[from] gcs::GcsError),
    #[error(transparent)]
    Povm(#[from] povm::PovmError),
    #[error(transparent)]
    Threshold(#[from] threshold::ThresholdError),
    #[error(transparent)]
    Monge(#[from] monge::MongeError),
    #[error(transparent)]
    Quadrature(#[from] quadrature::QuadratureError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification shared by the CLI exit codes and the C status codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed configuration or arguments.
    Usage,
    /// Adaptive quadrature gave up before reaching its tolerance.
    Quadrature,
    Io,
    /// Arguments parsed but lie outside the domain of the operation.
    Domain,
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Usage,
            Error::Quadrature(_)
            | Error::Povm(povm::PovmError::Quadrature { .. })
            | Error::Monge(monge::MongeError::Quadrature(_)) => ErrorKind::Quadrature,
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Domain,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
