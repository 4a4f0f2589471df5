use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mixed scalar kinds: {0} series combined with {1} series without promotion")]
    MixedScalarKinds(&'static str, &'static str),

    #[error("non-invertible series")]
    NonInvertible,

    #[error("substitution must be a near-identity series x(1 + ...): {0}")]
    NotNearIdentity(String),

    #[error("coefficient of x^{exponent} is beyond the truncation order {order}")]
    UnknownCoefficient { exponent: i32, order: i32 },

    #[error("non-invertible leading metric: {0}")]
    DegenerateMetric(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mass requires expansion order n = {n}, got {order}")]
    OrderMismatch { n: usize, order: usize },

    #[error("non-positive metric component {component} at grid index {index}: {value}")]
    NonPositiveComponent {
        component: &'static str,
        index: usize,
        value: f64,
    },

    #[error("ill-conditioned fit: {0}")]
    IllConditionedFit(String),

    #[error("numerical instability at t = {time}: {detail}")]
    Instability { time: f64, detail: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}
