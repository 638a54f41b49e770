use thiserror::Error;

/// Errors raised by the game engine, the strategies and the data pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside its mathematical domain.
    #[error("{name} = {value} is outside {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// Caller broke a precondition (lengths, dimensions, windows).
    #[error("usage error: {0}")]
    Usage(String),

    /// A strategy announced a ratio the game does not admit.
    #[error("strategy violation at round {round}: {detail}")]
    StrategyViolation { round: usize, detail: String },

    /// Non-finite objective or gradient during optimization.
    #[error("numeric failure at round {round}: {detail}")]
    Numeric { round: usize, detail: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("invalid record at line {line}: {detail}")]
    Validation { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
