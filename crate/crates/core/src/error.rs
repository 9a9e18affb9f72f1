use thiserror::Error;

/// Errors raised anywhere in the numerical pipeline.
///
/// Variants map onto the CLI exit-code families: parameter and parse
/// problems are usage-level, everything else is a numerical failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("basis of {size} states exceeds the hard limit of {limit}")]
    Resource { size: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("dense solve of dimension {dim} exceeds the dense limit {limit}")]
    DenseLimit { dim: usize, limit: usize },

    #[error("solver did not converge after {iterations} iterations (best residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("shift {shift} lies within {distance:.3e} of the spectrum")]
    Conditioning { shift: String, distance: f64 },

    #[error("contour failure: {0}")]
    Contour(String),

    #[error("degenerate ground state (gap {gap:.3e})")]
    Degenerate { gap: f64 },

    #[error("Weyl truncation defect {defect:.3e} exceeds bound {bound:.3e}; raise n_max")]
    Truncation { defect: f64, bound: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cascade failed at scale {scale}: {source}")]
    Cascade {
        scale: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl Error {
    pub(crate) fn at_scale(self, scale: usize) -> Self {
        match self {
            e @ Error::Cascade { .. } => e,
            other => Error::Cascade {
                scale,
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
