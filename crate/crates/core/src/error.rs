use thiserror::Error;

/// Errors raised by decomposition, sampling and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("zero matrix has no compact SVD")]
    ZeroMatrix,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("design matrix rank-deficient")]
    RankDeficient,

    #[error("complement is empty")]
    EmptyComplement,

    #[error("no nonzero columns")]
    NoNonzeroColumns,

    #[error("row sketch lost rank; increase m2")]
    RowSketchLostRank,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// True for errors caused by invalid caller input rather than numerical failure.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::Precondition(_)
                | Error::ShapeMismatch(_)
                | Error::ZeroMatrix
                | Error::NonFinite { .. }
                | Error::Parse(_)
                | Error::EmptyComplement
                | Error::NoNonzeroColumns
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
