use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong in the toolkit.
///
/// [`Error::is_numerical`] splits the variants into "the input was bad"
/// (domain, validation, I/O) and "the numerics failed to meet their target".
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("series or integral failed to converge: {0}")]
    Convergence(String),
    #[error("truncation error: {0}")]
    Truncation(String),
    #[error("jet order {requested} exceeds the supported maximum {max}")]
    Order { requested: usize, max: usize },
    #[error("expected {expected} points, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("quadrature error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },
    #[error("grid resolution: {0}")]
    Resolution(String),
    #[error("eigensolver failure: {0}")]
    Solver(String),
    #[error("finite-difference error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Stencil { estimate: f64, tolerance: f64 },
    #[error("rate fit: {0}")]
    Fit(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Convergence(_) => "convergence",
            Error::Truncation(_) => "truncation",
            Error::Order { .. } => "order",
            Error::Arity { .. } => "arity",
            Error::Quadrature { .. } => "quadrature",
            Error::Resolution(_) => "resolution",
            Error::Solver(_) => "solver",
            Error::Stencil { .. } => "stencil",
            Error::Fit(_) => "fit",
            Error::Io { .. } => "io",
            Error::Schema(_) => "schema",
        }
    }

    /// True when the failure is internal to the numerics rather than caused
    /// by the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence(_)
                | Error::Truncation(_)
                | Error::Quadrature { .. }
                | Error::Solver(_)
                | Error::Stencil { .. }
        )
    }
}
