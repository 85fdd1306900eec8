use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("path {index}: delay {delay_s:e} s is outside the dictionary coverage [0, {max_s:e}) s")]
    Coverage {
        index: usize,
        delay_s: f64,
        max_s: f64,
    },

    #[error("observation span {span_s:e} s exceeds the coherence guard of {limit_s:e} s")]
    CoherenceGuard { span_s: f64, limit_s: f64 },

    #[error("expected {expected} burst sets, got {actual}")]
    BurstCount { expected: usize, actual: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("solver diverged at iteration {iteration}: non-finite {quantity}")]
    Diverged {
        iteration: usize,
        quantity: &'static str,
    },

    #[error("grid index {index} is outside {min}..={max}")]
    GridIndex { index: usize, min: usize, max: usize },

    #[error("phase of a zero accumulator is undefined ({0})")]
    ZeroAccumulator(&'static str),

    #[error("canceller gain magnitude {magnitude:e} lies in a notch; power estimate is unreliable")]
    Notch { magnitude: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),

    #[error("failed to serialize: {0}")]
    Serialize(#[from] toml::ser::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
