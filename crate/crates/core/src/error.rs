use alloc::string::String;
use core::fmt;

/// Errors raised by the core algorithms.
///
/// Rejections that are data (unmatched annotation spans, dropped judge
/// entries) are reported through counters instead of this type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A configuration value is outside its admissible range.
    Config(String),
    /// Input data violates a documented precondition.
    Invalid(String),
    /// Two shapes that must agree do not.
    Shape { expected: usize, found: usize, what: &'static str },
    /// A loss or score became NaN or infinite.
    NonFinite { what: &'static str, step: Option<usize> },
    /// A pluggable collaborator (judge, oracle, generator) failed.
    External(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Invalid(msg) => write!(f, "invalid input: {msg}"),
            Error::Shape { expected, found, what } => {
                write!(f, "{what}: expected {expected}, found {found}")
            }
            Error::NonFinite { what, step: Some(step) } => {
                write!(f, "non-finite {what} at step {step}")
            }
            Error::NonFinite { what, step: None } => write!(f, "non-finite {what}"),
            Error::External(msg) => write!(f, "external failure: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
