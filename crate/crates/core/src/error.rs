use thiserror::Error;

/// Errors raised by the reconstruction toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Size {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("image shape error: {0}")]
    Shape(String),
    #[error("operation requires a {expected} dictionary")]
    Kind { expected: &'static str },
    #[error("refused, problem too large: {0}")]
    TooLarge(String),
    #[error("block Cholesky failed at block {block}: pivot {pivot:e} below tolerance")]
    Factorization { block: usize, pivot: f64 },
    #[error("preconditioner has not been factored")]
    Unfactored,
    #[error("non-positive curvature {curvature:e} in conjugate gradients at iteration {iteration}")]
    Definiteness { iteration: usize, curvature: f64 },
    #[error("solver diverged: non-finite objective at outer iteration {iteration}")]
    Divergence { iteration: usize },
    #[error("continuation stage {stage}: {source}")]
    Stage { stage: usize, source: Box<Error> },
    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Size {
            context,
            expected,
            actual,
        })
    }
}
