use thiserror::Error;

/// Errors surfaced by distribution construction, oracle solvers, estimators,
/// and experiment plumbing.
#[derive(Debug, Error)]
pub enum CdrError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("marginal density vanishes at {0:?}, posterior undefined there")]
    ZeroMarginalDensity(Vec<f64>),

    #[error("no sampler available: {0}")]
    UnsupportedSampler(String),

    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("map is not strictly increasing: {0}")]
    NonMonotoneMap(String),

    #[error("induced class prior {0} is degenerate")]
    DegeneratePrior(f64),

    #[error("noise rates rho0 + rho1 = {0} must stay below 1")]
    NoiseTooLarge(f64),

    #[error("grid has {0} points, brute force enumeration is capped at {1}")]
    GridTooLarge(usize, usize),

    #[error("value {value} outside valid range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("exact level-alpha threshold does not exist: {0}")]
    AssumptionAViolated(String),

    #[error("order-statistic rank floor(n(1-alpha)) = 0 for n = {n}, alpha = {alpha}")]
    RankOutOfRange { n: usize, alpha: f64 },

    #[error("kernel system is numerically singular even after ridge jitter")]
    SingularKernelMatrix,

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CdrError>;
