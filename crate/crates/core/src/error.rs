use thiserror::Error;

/// Errors raised by the library. Variant names double as the machine-readable
/// reason codes emitted by the CLI.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("functions live on different spaces ({left} vs {right})")]
    MismatchedSpaces { left: String, right: String },

    #[error("negative entry {value} at index {index}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("element {0} is not in the space")]
    NotASubset(i64),

    #[error("deviation norm {measured} exceeds threshold eta = {required}")]
    ThresholdExceeded { measured: f64, required: f64 },

    #[error("truncation tail {tail:e} above tolerance {tolerance:e}")]
    Truncation { tail: f64, tolerance: f64 },

    #[error("{stage}: no convergence after {iterations} iterations (last change {last_change:e})")]
    IterationLimit {
        stage: &'static str,
        iterations: usize,
        last_change: f64,
    },

    #[error("monotone bracket did not close (width {width:e})")]
    BracketOpen { width: f64 },

    #[error("postcondition violated: {0}")]
    PostconditionViolation(String),

    #[error("subtree too large for exhaustive normalization ({configurations} configurations)")]
    SubtreeTooLarge { configurations: f64 },

    #[error("argument {value} outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Short reason code, stable across releases.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "InvalidInput",
            Error::MismatchedSpaces { .. } => "MismatchedSpaces",
            Error::NegativeEntry { .. } => "NegativeEntry",
            Error::NotASubset(_) => "NotASubset",
            Error::ThresholdExceeded { .. } => "ThresholdExceeded",
            Error::Truncation { .. } => "TruncationError",
            Error::IterationLimit { .. } => "IterationLimit",
            Error::BracketOpen { .. } => "BracketOpen",
            Error::PostconditionViolation(_) => "PostconditionViolation",
            Error::SubtreeTooLarge { .. } => "SubtreeTooLarge",
            Error::Domain { .. } => "DomainError",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
