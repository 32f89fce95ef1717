//! Human-in-the-loop training service: concurrent human dialogue sessions,
//! each served by one of the registered training runs, whose finished
//! episodes become real experience for that run.

pub mod error;
pub mod http;
pub mod learner;
pub mod log;
pub mod render;
pub mod service;
pub mod session;

pub use error::{HitlError, Result};
pub use http::{router, serve, FeedbackRequest, TurnRequest};
pub use learner::RunStatus;
pub use service::{CreatedSession, HitlConfig, HitlService, StreamEvent};
pub use session::{FeedbackReason, FeedbackRecord, SessionStatus, SessionView, TurnOutcome};
