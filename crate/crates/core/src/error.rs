use std::io;

use thiserror::Error;

use crate::analysis::ReferencePoint;
use crate::solvers::RunTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    /// Power iteration ran out of iterations; `estimate` is the last Rayleigh quotient.
    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    NotConverged { iterations: usize, estimate: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} is infeasible (violation {violation:e})")]
    Infeasible { what: &'static str, violation: f64 },

    /// The trace holds every checkpoint recorded before the blow-up.
    #[error("non-finite iterate at iteration {iteration}")]
    NonFinite { iteration: usize, trace: Box<RunTrace> },

    /// The reference solve stopped at `max_iters`; the best point found is attached.
    #[error("reference solve stopped with residual {:e}", .0.residual)]
    ReferenceNotConverged(Box<ReferencePoint>),

    #[error("reference residual {residual:e} exceeds 1% of the bound {bound:e}")]
    ReferenceTooCoarse { residual: f64, bound: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
