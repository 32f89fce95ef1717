//! Deep Dyna-Q for task-completion dialogue policy learning.
//!
//! The crate contains the movie-ticket booking domain, a small dense neural
//! network library, the dialogue state tracker, the DQN dialogue policy, the
//! learned world model, an agenda-based simulated user, and the training and
//! experiment drivers that tie them together.

pub mod domain;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod policy;
pub mod simulator;
pub mod tracker;
pub mod trainer;
pub mod world_model;

pub use error::{Error, Result};
