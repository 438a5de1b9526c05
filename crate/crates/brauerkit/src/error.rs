use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("ambiguous extension{}: candidates {candidates:?}", stage.map(|s| format!(" at stage {s}")).unwrap_or_default())]
    AmbiguousExtension {
        stage: Option<usize>,
        candidates: Vec<String>,
    },
    #[error("no extension of {quot} by {sub} satisfies the witness constraint")]
    NoExtension { sub: String, quot: String },
    #[error("extension search too large: {0}")]
    SearchTooLarge(String),
    #[error("not a C_{n} action: {reason}")]
    NotAnAction { n: u64, reason: String },
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("density fact missing for prime {0}")]
    DensityUnknown(u64),
    #[error("inconsistent point: {0}")]
    InconsistentPoint(String),
    #[error("unmatched rule: {0}")]
    UnmatchedRule(String),
    #[error("no fact: {0}")]
    NoFact(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("not stabilized: {0}")]
    NotStabilized(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
