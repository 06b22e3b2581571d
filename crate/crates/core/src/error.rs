use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid drift model: {0}")]
    InvalidModel(String),

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("degenerate state at transition {index}: propagator variance vanishes")]
    DegenerateState { index: usize },

    #[error("optimizer failure: {0}")]
    OptimizerFailure(String),

    #[error("model selection failed for every order")]
    SelectionFailure,

    #[error("too many rejected trajectories: {rejected} of {attempts} attempts diverged")]
    TooManyRejections { rejected: usize, attempts: usize },

    #[error("sampler stuck: acceptance fraction {acceptance:.4} below {threshold}")]
    ChainStuck { acceptance: f64, threshold: f64 },

    #[error("polynomial order {0} outside 1..=4")]
    OrderOutOfRange(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
