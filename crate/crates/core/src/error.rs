use thiserror::Error;

use crate::system::CouplingKind;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("expected a square matrix, found {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (relative asymmetry {residual:.3e})")]
    Asymmetric { residual: f64 },

    #[error("{0} did not converge")]
    NonConvergence(&'static str),

    #[error("matrix exponential overflows (norm {norm:.3e})")]
    Overflow { norm: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("subspace basis is empty")]
    EmptyBasis,

    #[error("coupling kind mismatch: operation needs {expected}, system is {found:?}")]
    KindMismatch {
        expected: &'static str,
        found: CouplingKind,
    },

    #[error("step size underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("step limit of {limit} reached at t = {t}")]
    StepLimit { t: f64, limit: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("rank is not constant along the trajectory: rank {found} at t = {t}, initial rank {expected}")]
    RankNotConstant { t: f64, expected: usize, found: usize },

    #[error("sample at t = {t} is not symmetric (relative asymmetry {residual:.3e})")]
    AsymmetricSample { t: f64, residual: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::NonConvergence(_)
                | Error::Overflow { .. }
                | Error::StepUnderflow { .. }
                | Error::NonFiniteState { .. }
                | Error::StepLimit { .. }
        )
    }

    pub(crate) fn dims(context: &'static str, expected: (usize, usize), found: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            context,
            expected: format!("{}x{}", expected.0, expected.1),
            found: format!("{}x{}", found.0, found.1),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
