use thiserror::Error;

/// Errors raised by the integrators, models and analyses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state became non-finite at t = {time}")]
    NonFiniteState { time: f64 },
    #[error("guard was armed but never crossed within {duration} s")]
    NoCrossing { duration: f64 },
    #[error("guard never dropped below the arming threshold within {duration} s")]
    NotArmed { duration: f64 },
    #[error("event refinement stalled with guard residual {residual:e}")]
    EventNotResolved { residual: f64 },
    #[error("state is not on the switching surface (guard residual {residual:e})")]
    NotOnGuard { residual: f64 },
    #[error("matrix is singular to working precision")]
    SingularMatrix,
    #[error("iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("kinetic energy {k0} does not exceed omega^2 x0 y0 = {bound}")]
    InfeasibleEnergy { k0: f64, bound: f64 },
    #[error("lateral coordinate too close to zero for the chart ({y:e})")]
    DegenerateY { y: f64 },
    #[error("inconsistent chart coordinates: |gamma| = {gamma} exceeds v^2/2 = {bound}")]
    InconsistentCoords { gamma: f64, bound: f64 },
    #[error("reduced state cannot be lifted onto the gait manifold: {0}")]
    LiftInfeasible(&'static str),
    #[error("step failed: {0}")]
    StepFailed(&'static str),
    #[error("output decoupling matrix is ill-conditioned (condition ~ {condition:e})")]
    SingularDecoupling { condition: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

impl Error {
    /// Failures that mean the gait fell or stopped, as opposed to a numerical
    /// or configuration problem.
    pub fn is_gait_failure(&self) -> bool {
        matches!(
            self,
            Error::NoCrossing { .. } | Error::NotArmed { .. } | Error::StepFailed(_)
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
