use thiserror::Error;

/// Which of the two planning sets turned out empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanningSetKind {
    State,
    Input,
}

impl std::fmt::Display for PlanningSetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlanningSetKind::State => f.write_str("state planning set"),
            PlanningSetKind::Input => f.write_str("input planning set"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("{context}: matrix must be square, got {rows}x{cols}")]
    NotSquare {
        context: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("{0}: non-finite entry")]
    NonFinite(&'static str),

    #[error("{0}: result overflowed")]
    Overflow(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("matrix is not stable: spectral radius {radius} >= 1")]
    NotStable { radius: f64 },

    #[error("{0}: matrix is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("lifting equations CP = Cbar, P Abar = A P + B Q have no solution (residual {residual:.3e})")]
    LiftUnsolvable { residual: f64 },

    #[error("lower-layer system is not stabilizable: {0}")]
    NotStabilizable(String),

    #[error("semidefinite program infeasible: {0}")]
    SdpInfeasible(String),

    #[error("{kind} of piece {piece} is empty")]
    EmptyPlanningSet { piece: usize, kind: PlanningSetKind },

    #[error("polytope is unbounded along direction {direction}")]
    Unbounded { direction: usize },

    #[error("planner QP infeasible: {0}")]
    PlannerInfeasible(String),

    #[error("initial higher-layer state violates the planning set by {violation:.3e}")]
    StateOutsidePlanningSet { violation: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_err(context: &'static str, expected: impl ToString, got: impl ToString) -> Error {
    Error::Dimension {
        context,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
