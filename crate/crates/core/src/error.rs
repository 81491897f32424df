use thiserror::Error;

use crate::lp::LpError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid task: {}", .0.join("; "))]
    InvalidTask(Vec<String>),

    #[error("rectification resolution too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("epsilon-net too large: {count} samples exceeds cap {cap}")]
    NetTooLarge { count: usize, cap: usize },

    #[error("endpoint equalities cannot be met with {coefficients} coefficient(s) per curve")]
    InfeasibleEndpoints { coefficients: usize },

    #[error("no disjunct assignment yields a feasible program")]
    NoFeasibleAssignment,

    #[error("search budget exhausted before any feasible assignment was found")]
    BudgetExhausted,

    #[error("reverse Weibull fit failed: {0}")]
    FitFailed(String),

    #[error("unknown plant `{0}`")]
    UnknownPlant(String),

    #[error("state left the admissible domain at t = {t}: {reason}")]
    StateLeftDomain { t: f64, reason: String },

    #[error("numerical blow-up at t = {t}")]
    NumericalBlowup { t: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
