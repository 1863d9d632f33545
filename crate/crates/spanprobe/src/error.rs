use std::io;
use std::path::Path;

/// Failures grouped by the exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("numeric: {0}")]
    Numeric(String),
    #[error("external: {0}")]
    External(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Data(_) => 2,
            Error::Numeric(_) => 3,
            Error::External(_) => 4,
        }
    }

    pub fn io(path: &Path, e: io::Error) -> Self {
        Error::Data(format!("{}: {e}", path.display()))
    }
}

impl From<spanprobe_core::Error> for Error {
    fn from(e: spanprobe_core::Error) -> Self {
        use spanprobe_core::Error as E;
        match e {
            E::Config(_) => Error::Usage(e.to_string()),
            E::Invalid(_) | E::Shape { .. } => Error::Data(e.to_string()),
            E::NonFinite { .. } => Error::Numeric(e.to_string()),
            E::External(_) => Error::External(e.to_string()),
        }
    }
}
