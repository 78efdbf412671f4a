use thiserror::Error;

/// Errors raised by the chain builders, certificate solvers and simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid probability `{name}` = {value}: must lie in [0, 1]")]
    Probability { name: &'static str, value: f64 },

    #[error("invalid probability vector: {0}")]
    ProbabilityVector(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix has a negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("power iteration did not converge within {iterations} iterations (last gap {gap:e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("certification matrix is not Schur stable (spectral radius {spectral_radius})")]
    NotSchur { spectral_radius: f64 },

    #[error("inconsistent certificate: {0}")]
    Certificate(String),

    #[error("closed form unavailable: {0}")]
    ClosedFormUnavailable(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("bisection bracket failure: {0}")]
    Bracket(String),

    #[error("invalid channel outcome gamma = {0}: must be 0, 1 or 2")]
    Gamma(u8),

    #[error("availability N = {n} with gamma = {gamma}: processing only happens on a successful transmission")]
    Availability { gamma: u8, n: usize },

    #[error("configuration error at {location}: {reason}")]
    Config { location: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
