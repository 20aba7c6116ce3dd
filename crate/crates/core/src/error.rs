use thiserror::Error;

/// Errors raised by the tensor, geometry, optimization and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("mode {mode} out of range for a tensor of order {order}")]
    InvalidMode { mode: usize, order: usize },

    #[error("invalid shape {0:?}: every extent must be at least 1 and the order at least 1")]
    InvalidShape(Vec<usize>),

    #[error("{0}: empty input")]
    Empty(&'static str),

    #[error("rank-deficient matrix in {op} (condition estimate {condition:e})")]
    RankDeficient { op: &'static str, condition: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed {format} data: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error("could not place {k} centroids at separation {separation} after {attempts} attempts")]
    InfeasibleSeparation {
        k: usize,
        separation: f64,
        attempts: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error stems from bad input or configuration, as opposed to a numerical failure.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::RankDeficient { .. } | Error::NonFinite(_) | Error::InfeasibleSeparation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
