use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value failed validation. `field` is the dotted path of
    /// the offending key.
    #[error("invalid value for `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    /// Downlink powers violate `P_un + P_mu <= P`.
    #[error("infeasible power split: P_un + P_mu = {total:e} exceeds the total downlink budget P = {budget:e} (constraint P_un + P_mu <= P)")]
    InfeasiblePower { total: f64, budget: f64 },

    /// A pilot violates its per-transmission energy budget `tau * p_up <= E`.
    #[error("infeasible pilot for {user}: tau * p_up = {energy:e} exceeds energy budget {budget:e}")]
    InfeasiblePilot { user: String, energy: f64, budget: f64 },

    #[error("`{name}` = {value:e} outside [{min:e}, {max:e}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("water-level bisection did not converge after {iterations} iterations (power-sum error {residual:e})")]
    BisectionFailed { iterations: usize, residual: f64 },

    #[error("instance too large for the brute-force oracle: {0}")]
    InstanceTooLarge(String),

    #[error("at least {min} realizations required, got {got}")]
    TooFewRealizations { min: usize, got: usize },

    #[error("invalid Pareto point list: {0}")]
    InvalidPoints(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig { .. } => "invalid_config",
            Error::InfeasiblePower { .. } => "infeasible_power",
            Error::InfeasiblePilot { .. } => "infeasible_pilot",
            Error::OutOfRange { .. } => "out_of_range",
            Error::NonPositiveDistance(_) => "non_positive_distance",
            Error::BisectionFailed { .. } => "bisection_failed",
            Error::InstanceTooLarge(_) => "instance_too_large",
            Error::TooFewRealizations { .. } => "too_few_realizations",
            Error::InvalidPoints(_) => "invalid_points",
            Error::Dimension(_) => "dimension_mismatch",
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
        }
    }
}
