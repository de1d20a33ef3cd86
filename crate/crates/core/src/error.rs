use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid market model: {0}")]
    InvalidModel(String),

    #[error("invalid information source specification: {0}")]
    InvalidSourceSpec(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("discount interval is reversed: from {from} to {to}")]
    BadInterval { from: f64, to: f64 },

    #[error("effective flow rate expression is negative ({0})")]
    NegativeEffectiveRate(f64),

    #[error("time {t} is at or past the horizon {horizon}")]
    TimeAtOrPastHorizon { t: f64, horizon: f64 },

    #[error("quadrature did not reach tolerance {tolerance} (estimated error {estimate})")]
    QuadratureFailure { tolerance: f64, estimate: f64 },

    #[error("strike {strike} outside the attainable price interval ({low}, {high})")]
    StrikeOutOfRange { strike: f64, low: f64, high: f64 },

    #[error("flow rate {0} is not positive; bond price is not monotone in the information")]
    NonPositiveFlowRate(f64),

    #[error("target price {target} outside the attainable interval ({low}, {high})")]
    TargetOutOfRange { target: f64, low: f64, high: f64 },

    #[error("root search did not converge: {0}")]
    NoConvergence(String),

    #[error("only {found} paths available, at least {required} required")]
    TooFewPaths { found: usize, required: usize },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("sample has zero dispersion at every grid point")]
    DegenerateSample,
}
