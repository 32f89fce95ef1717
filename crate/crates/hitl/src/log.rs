//! Append-only JSON-lines event log of every session.

use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ddq::domain::{DialogueAct, UserGoal};

use crate::error::{HitlError, Result};
use crate::session::FeedbackRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    SessionCreated {
        session_id: String,
        run: usize,
        goal: UserGoal,
    },
    UserTurn {
        session_id: String,
        turn_id: u64,
        act: DialogueAct,
        /// Agent action chosen in reply, if the agent answered.
        agent_action: Option<usize>,
    },
    Feedback {
        record: FeedbackRecord,
    },
}

#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(EventLog {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes and flushes one event.
    pub fn append(&mut self, event: &LogEvent) -> Result<()> {
        let mut line = serde_json::to_string(event)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        Ok(())
    }
}

/// Reads every event of a log; a missing file is an empty log.
pub fn read_events(path: &Path) -> Result<Vec<LogEvent>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut events = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| HitlError::Log(format!("line {}: {e}", i + 1)))?;
        events.push(event);
    }
    Ok(events)
}
