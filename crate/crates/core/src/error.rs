use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid constants: {0}")]
    InvalidConstants(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("objective has no gradient oracle")]
    MissingGradient,

    #[error("integration budget exceeded: {steps} steps before t = {t:.6e} (cap {cap})")]
    IntegrationBudgetExceeded { steps: usize, t: f64, cap: usize },

    #[error("numerical blow-up; last valid time t = {last_valid_time:.6e}")]
    NumericalBlowup { last_valid_time: f64 },

    #[error("damping {alpha} outside the feasible region: {detail}")]
    InfeasibleDamping { alpha: f64, detail: String },

    #[error("epsilon {eps} makes the certified exponent nonpositive")]
    VacuousEpsilon { eps: f64 },

    #[error("no feasible delta for alpha = {alpha}")]
    NoFeasibleDelta { alpha: f64 },

    #[error("no such implication under the given flags: {0}")]
    NoImplication(String),

    #[error("distance/projection oracle required for {0} but none available")]
    MissingOracle(String),

    #[error("all samples are at the minimum value; nothing to estimate")]
    EmptyEstimate,

    #[error("prox subproblem did not converge within the iteration cap")]
    ProxBudgetExceeded,

    #[error("handle carries no (ns-PL) constant; set mu_ns before solving")]
    MissingConstant,

    #[error("trajectory has no velocities (gradient flow?)")]
    MissingVelocities,

    #[error("fewer than {min} usable samples for the fit (got {got})")]
    InsufficientData { min: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
