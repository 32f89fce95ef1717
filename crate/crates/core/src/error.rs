use std::fmt;
use std::io;

/// Errors surfaced by the library.
#[derive(Debug)]
pub enum Error {
    /// Invalid or inconsistent configuration (empty goal database, bad K, ...).
    Config(String),
    /// A persisted file could not be parsed.
    Parse { line: usize, message: String },
    /// A persisted file parsed but does not match what the caller expects
    /// (wrong format tag, layer shapes, missing CSV columns).
    Format(String),
    /// A gradient or parameter became NaN or infinite.
    NonFinite(String),
    Io(io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Parse { line, message } => write!(f, "parse error on line {line}: {message}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::NonFinite(msg) => write!(f, "training error: non-finite value in {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(err: io::Error) -> Self {
        Error::Io(err)
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Format(err.to_string())
    }
}
