use thiserror::Error;

/// Domain violations reported by a single canonical term.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum TermError {
    #[error("canonical measure {xi} is outside the primal domain")]
    PrimalDomain { xi: f64 },
    #[error("dual variable {sigma} is outside the dual domain")]
    DualDomain { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("term {index}: {source}")]
    Term {
        index: usize,
        #[source]
        source: TermError,
    },
    #[error(
        "G(sigma) is near-singular (smallest |eigenvalue| {min_abs_eig:.3e} <= {threshold:.3e})"
    )]
    Pole { min_abs_eig: f64, threshold: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn term(index: usize) -> impl FnOnce(TermError) -> Error {
        move |source| Error::Term { index, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
