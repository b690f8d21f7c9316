use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A statistic or ratio whose denominator vanished.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("missing setting `{0}` in counts table")]
    MissingSetting(String),

    #[error("subtracting accidentals from `{key}` gives {value} < 0")]
    NegativeResult { key: String, value: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("invalid hidden-variable model: {0}")]
    InvalidSpec(String),

    #[error("need at least 3 rates spanning 4x, got {0}")]
    InsufficientRates(String),

    /// Configuration rejected; `key` names the offending field.
    #[error("invalid config value for `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
