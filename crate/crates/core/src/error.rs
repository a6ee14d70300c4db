use thiserror::Error;

/// Errors produced by the analysis and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A solver's state space or enumeration guard was exceeded.
    #[error("resource limit exceeded: {what} ({hint})")]
    ResourceLimit { what: String, hint: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unsupported policy: {0}")]
    UnsupportedPolicy(String),

    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("target {target} out of range, achievable supremum is {supremum}")]
    OutOfRange { target: f64, supremum: f64 },

    #[error("inconsistent statistics: {0}")]
    InconsistentStats(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn limit(what: impl Into<String>, hint: impl Into<String>) -> Self {
        Error::ResourceLimit {
            what: what.into(),
            hint: hint.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
