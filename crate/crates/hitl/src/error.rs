use std::fmt;
use std::io;

use crate::session::SessionStatus;

#[derive(Debug)]
pub enum HitlError {
    /// No training run is registered, so no session can be served.
    NoRuns,
    UnknownSession(String),
    /// The session no longer accepts turns.
    SessionClosed { session_id: String, status: SessionStatus },
    /// A turn id that was already processed.
    DuplicateTurn { expected: u64, got: u64 },
    /// A turn id from the future.
    OutOfOrderTurn { expected: u64, got: u64 },
    DuplicateFeedback(String),
    InvalidAct(String),
    /// The event log does not replay.
    Log(String),
    Core(ddq::Error),
    Io(io::Error),
}

pub type Result<T> = std::result::Result<T, HitlError>;

impl HitlError {
    /// Stable machine-readable code used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            HitlError::NoRuns => "no_runs",
            HitlError::UnknownSession(_) => "unknown_session",
            HitlError::SessionClosed { .. } => "session_closed",
            HitlError::DuplicateTurn { .. } => "duplicate_turn",
            HitlError::OutOfOrderTurn { .. } => "out_of_order_turn",
            HitlError::DuplicateFeedback(_) => "duplicate_feedback",
            HitlError::InvalidAct(_) => "invalid_act",
            HitlError::Log(_) => "log",
            HitlError::Core(_) => "internal",
            HitlError::Io(_) => "io",
        }
    }
}

impl fmt::Display for HitlError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HitlError::NoRuns => f.write_str("no training run is registered"),
            HitlError::UnknownSession(id) => write!(f, "unknown session {id}"),
            HitlError::SessionClosed { session_id, status } => {
                write!(f, "session {session_id} is closed ({status})")
            }
            HitlError::DuplicateTurn { expected, got } => {
                write!(f, "turn {got} was already processed (next turn id is {expected})")
            }
            HitlError::OutOfOrderTurn { expected, got } => {
                write!(f, "turn {got} arrived before turn {expected}")
            }
            HitlError::DuplicateFeedback(id) => write!(f, "session {id} already has feedback"),
            HitlError::InvalidAct(msg) => write!(f, "invalid dialogue act: {msg}"),
            HitlError::Log(msg) => write!(f, "event log: {msg}"),
            HitlError::Core(err) => write!(f, "{err}"),
            HitlError::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for HitlError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            HitlError::Core(err) => Some(err),
            HitlError::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<ddq::Error> for HitlError {
    fn from(err: ddq::Error) -> Self {
        HitlError::Core(err)
    }
}

impl From<io::Error> for HitlError {
    fn from(err: io::Error) -> Self {
        HitlError::Io(err)
    }
}

impl From<serde_json::Error> for HitlError {
    fn from(err: serde_json::Error) -> Self {
        HitlError::Log(err.to_string())
    }
}
