use thiserror::Error;

/// Errors produced anywhere in the model toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("timescale `{field}` must be strictly positive (got {value})")]
    NonPositiveTimescale { field: &'static str, value: f64 },

    #[error("`{field}` must lie in the open interval (0, 1) (got {value})")]
    ShareOutOfRange { field: &'static str, value: f64 },

    #[error("`{field}` has an invalid sign or magnitude (got {value})")]
    NegativeRate { field: &'static str, value: f64 },

    #[error("invalid simulation setting `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: malformed value for `{key}`: {reason}")]
    MalformedValue {
        line: usize,
        key: String,
        reason: String,
    },

    #[error("non-finite state at step {step} (t = {t})")]
    NonFiniteState { step: u64, t: f64 },

    #[error("capital level must be positive (got {0})")]
    NonPositiveCapital(f64),

    #[error("micro-ensemble step too large: dt * rate = {0} >= 1")]
    StepTooLarge(f64),

    #[error("Newton refinement diverged from sentiment root s = {root}")]
    NewtonDivergence { root: f64 },

    #[error("window holds {got} samples, need at least {need}")]
    WindowTooSmall { got: usize, need: usize },

    #[error("series has {0} upward zero crossings, need at least 2")]
    InsufficientCrossings(usize),

    #[error("operation requires a {expected} trajectory")]
    WrongMode { expected: &'static str },

    #[error("series is not uniformly sampled")]
    NonUniformSampling,
}

pub type Result<T> = std::result::Result<T, Error>;
