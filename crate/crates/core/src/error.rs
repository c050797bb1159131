use thiserror::Error;

/// Errors raised by estimation, testing and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown model `{0}` (expected one of gamma, exponential, normal, poisson, bernoulli)")]
    UnknownModel(String),

    #[error("parameter has {found} coordinates, model `{model}` expects {expected}")]
    DimensionMismatch {
        model: String,
        expected: usize,
        found: usize,
    },

    #[error("parameter {0:?} lies outside the model's parameter domain")]
    OutOfDomain(Vec<f64>),

    #[error("sample of size {found} is too small, need at least {required}")]
    InsufficientData { required: usize, found: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("moment Jacobian is singular at {0:?}")]
    SingularJacobian(Vec<f64>),

    #[error("sample covariance is singular (condition number {condition:e})")]
    SingularCovariance { condition: f64 },

    #[error("Newton solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("non-finite observation at index {0}")]
    NonFinite(usize),

    #[error("no critical value for d={dim}, level={level}; supply a table or simulate one")]
    MissingCriticalValue { dim: usize, level: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
