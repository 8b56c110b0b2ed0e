use std::fmt;

use crate::gp::GpSolution;
use crate::model::Layer;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which policy moment an error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    /// `E[P^δ]`
    PowerDelta,
    /// `E[P^{-δ} h^{-δ}]`
    InverseFaded,
    /// `E[P]`
    Mean,
}

impl fmt::Display for MomentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MomentKind::PowerDelta => write!(f, "E[P^delta]"),
            MomentKind::InverseFaded => write!(f, "E[P^-delta h^-delta]"),
            MomentKind::Mean => write!(f, "E[P]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("delta = {delta} is out of range: interference is infinite unless delta < 1")]
    DeltaOutOfRange { delta: f64 },

    #[error("moment {0} diverges")]
    MomentDiverges(MomentKind),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("infeasible densities: {0}")]
    InfeasibleDensities(String),

    #[error("numeric failure in {context}: achieved {achieved:e}")]
    NumericFailure { context: &'static str, achieved: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("discretized problem has no feasible point: {0}")]
    InfeasibleDiscretization(String),

    #[error("no convergence after {iterations} Newton steps (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<GpSolution>,
    },

    #[error(
        "{layer} lower bound {lower_bound} exceeds simulated outage {simulated} by more than 3 sigma ({sigma})"
    )]
    BoundViolation {
        layer: Layer,
        lower_bound: f64,
        simulated: f64,
        sigma: f64,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
