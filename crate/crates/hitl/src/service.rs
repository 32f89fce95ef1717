use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use tokio::sync::broadcast;

use ddq::domain::{sample_user_goal, DialogueAct, UserGoal};
use ddq::experiment::RunSpec;
use ddq::nn::Checkpoint;
use ddq::policy::select_action;
use ddq::trainer::{stream_rng, Domain, Trainer, TrainerConfig, Variant};

use crate::error::{HitlError, Result};
use crate::learner::{RunHandle, RunStatus};
use crate::log::{read_events, EventLog, LogEvent};
use crate::render::OPENING_PROMPT;
use crate::session::{FeedbackReason, FeedbackRecord, HitlSession, SessionView, TurnOutcome};

/// Random streams `SESSION_STREAM + i` drive session `i`.
const SESSION_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone)]
pub struct HitlConfig {
    /// Shared settings of every run; variant, K and seed come from `runs`.
    pub trainer: TrainerConfig,
    pub runs: Vec<RunSpec>,
    pub seed: u64,
    /// Append-only event log. Replayed on start when it already exists.
    pub log_path: Option<PathBuf>,
    /// Initial weights for every run.
    pub checkpoint: Option<Checkpoint>,
}

impl HitlConfig {
    pub fn new(trainer: TrainerConfig, runs: Vec<RunSpec>) -> Self {
        HitlConfig {
            seed: trainer.seed,
            trainer,
            runs,
            log_path: None,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatedSession {
    pub session_id: String,
    pub run: usize,
    pub variant: Variant,
    pub k: usize,
    pub goal: UserGoal,
    pub opening_prompt: String,
}

/// Pushed to streaming subscribers after every session change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub session_id: String,
    #[serde(flatten)]
    pub outcome: TurnOutcome,
}

struct SessionEntry {
    session: HitlSession,
    rng: Box<dyn RngCore + Send>,
}

#[derive(Default)]
struct Registry {
    sessions: HashMap<String, Arc<Mutex<SessionEntry>>>,
    created: u64,
}

pub struct HitlService {
    config: HitlConfig,
    domain: Arc<Domain>,
    runs: Vec<RunHandle>,
    registry: Mutex<Registry>,
    log: Option<Mutex<EventLog>>,
    events: broadcast::Sender<StreamEvent>,
}

impl HitlService {
    /// Builds one trainer per registered run and replays the event log, if
    /// any, so buffers and run state continue where they stopped.
    pub fn open(config: HitlConfig) -> Result<Self> {
        let domain = Arc::new(Domain::build(&config.trainer.domain, config.trainer.max_turns)?);
        let mut runs = Vec::with_capacity(config.runs.len());
        for (i, spec) in config.runs.iter().enumerate() {
            let trainer_config = TrainerConfig {
                variant: spec.variant,
                planning_steps: spec.k,
                seed: config.seed.wrapping_add(i as u64),
                ..config.trainer.clone()
            };
            let mut trainer = Trainer::with_domain(trainer_config, Arc::clone(&domain))?;
            if let Some(ckpt) = &config.checkpoint {
                trainer.load_checkpoint(ckpt)?;
            }
            runs.push(RunHandle::spawn(i, trainer));
        }
        let (events, _) = broadcast::channel(256);
        let mut service = HitlService {
            config,
            domain,
            runs,
            registry: Mutex::new(Registry::default()),
            log: None,
            events,
        };
        if let Some(path) = service.config.log_path.clone() {
            for (i, event) in read_events(&path)?.into_iter().enumerate() {
                service
                    .replay(event)
                    .map_err(|e| HitlError::Log(format!("event {}: {e}", i + 1)))?;
            }
            service.log = Some(Mutex::new(EventLog::open(&path)?));
        }
        Ok(service)
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn config(&self) -> &HitlConfig {
        &self.config
    }

    pub fn subscribe(&self) -> broadcast::Receiver<StreamEvent> {
        self.events.subscribe()
    }

    pub fn run_status(&self) -> Vec<RunStatus> {
        self.runs.iter().map(RunHandle::status).collect()
    }

    /// Waits until every queued episode has been learned from.
    pub fn flush(&self) {
        for run in &self.runs {
            run.flush();
        }
    }

    pub fn session(&self, session_id: &str) -> Result<SessionView> {
        Ok(self.entry(session_id)?.lock().expect("session lock").session.view())
    }

    pub fn create_session(&self) -> Result<CreatedSession> {
        if self.runs.is_empty() {
            return Err(HitlError::NoRuns);
        }
        let mut registry = self.registry.lock().expect("registry lock");
        let index = registry.created;
        let mut rng = stream_rng(self.config.seed, SESSION_STREAM + index);
        let run = rng.gen_range(0..self.runs.len());
        let goal = sample_user_goal(&mut rng, &self.domain.goals)?.clone();
        let session_id = format!("s{index:06}");
        self.append(&LogEvent::SessionCreated {
            session_id: session_id.clone(),
            run,
            goal: goal.clone(),
        })?;
        let session = self.insert(&mut registry, session_id, run, goal, Box::new(rng));
        Ok(CreatedSession {
            session_id: session.session_id.clone(),
            run,
            variant: session.variant,
            k: session.k,
            goal: session.goal.clone(),
            opening_prompt: OPENING_PROMPT.to_string(),
        })
    }

    /// Applies a human turn and returns the agent's reply or a terminal
    /// notice. A turn id other than the next expected one is rejected and
    /// leaves the session unchanged.
    pub fn post_user_turn(&self, session_id: &str, turn_id: u64, act: &DialogueAct) -> Result<TurnOutcome> {
        let entry = self.entry(session_id)?;
        let mut entry = entry.lock().expect("session lock");
        let SessionEntry { session, rng } = &mut *entry;
        let epsilon = self.config.trainer.epsilon;
        let outcome = session.apply_user_turn(&self.domain, turn_id, act, |q, s| select_action(q, s, epsilon, rng))?;
        let agent_action = match &outcome {
            Some(TurnOutcome::AgentTurn { action, .. }) => Some(*action),
            _ => None,
        };
        self.append(&LogEvent::UserTurn {
            session_id: session_id.to_string(),
            turn_id,
            act: act.clone(),
            agent_action,
        })?;
        let outcome = match outcome {
            Some(o) => o,
            None => TurnOutcome::Terminal {
                feedback: self.close(session, false, FeedbackReason::TurnLimit)?,
            },
        };
        self.publish(session_id, &outcome);
        Ok(outcome)
    }

    pub fn post_feedback(&self, session_id: &str, success: bool) -> Result<FeedbackRecord> {
        let entry = self.entry(session_id)?;
        let mut entry = entry.lock().expect("session lock");
        let record = self.close(&mut entry.session, success, FeedbackReason::UserJudged)?;
        self.publish(session_id, &TurnOutcome::Terminal { feedback: record.clone() });
        Ok(record)
    }

    pub fn abandon_session(&self, session_id: &str) -> Result<FeedbackRecord> {
        let entry = self.entry(session_id)?;
        let mut entry = entry.lock().expect("session lock");
        let record = self.close(&mut entry.session, false, FeedbackReason::Abandoned)?;
        self.publish(session_id, &TurnOutcome::Terminal { feedback: record.clone() });
        Ok(record)
    }

    fn close(&self, session: &mut HitlSession, success: bool, reason: FeedbackReason) -> Result<FeedbackRecord> {
        let (record, experiences) = session.finalize(&self.domain, success, reason)?;
        self.append(&LogEvent::Feedback { record: record.clone() })?;
        if !experiences.is_empty() {
            self.runs[session.run].submit(experiences, success);
        }
        Ok(record)
    }

    fn entry(&self, session_id: &str) -> Result<Arc<Mutex<SessionEntry>>> {
        self.registry
            .lock()
            .expect("registry lock")
            .sessions
            .get(session_id)
            .cloned()
            .ok_or_else(|| HitlError::UnknownSession(session_id.to_string()))
    }

    fn insert(&self, registry: &mut Registry, session_id: String, run: usize, goal: UserGoal, rng: Box<dyn RngCore + Send>) -> HitlSession {
        let spec = self.config.runs[run];
        let session = HitlSession::new(session_id.clone(), run, spec.variant, spec.k, goal, self.runs[run].snapshot());
        registry.created += 1;
        registry.sessions.insert(
            session_id,
            Arc::new(Mutex::new(SessionEntry {
                session: session.clone(),
                rng,
            })),
        );
        session
    }

    fn append(&self, event: &LogEvent) -> Result<()> {
        match &self.log {
            Some(log) => log.lock().expect("log lock").append(event),
            None => Ok(()),
        }
    }

    fn publish(&self, session_id: &str, outcome: &TurnOutcome) {
        let _ = self.events.send(StreamEvent {
            session_id: session_id.to_string(),
            outcome: outcome.clone(),
        });
    }

    fn replay(&self, event: LogEvent) -> Result<()> {
        match event {
            LogEvent::SessionCreated { session_id, run, goal } => {
                if run >= self.runs.len() {
                    return Err(HitlError::Log(format!("session {session_id} names unknown run {run}")));
                }
                let mut registry = self.registry.lock().expect("registry lock");
                let index = registry.created;
                let rng = stream_rng(self.config.seed, SESSION_STREAM + index);
                self.insert(&mut registry, session_id, run, goal, Box::new(rng));
            }
            LogEvent::UserTurn {
                session_id,
                turn_id,
                act,
                agent_action,
            } => {
                let entry = self.entry(&session_id)?;
                let mut entry = entry.lock().expect("session lock");
                let mut chose = false;
                entry.session.apply_user_turn(&self.domain, turn_id, &act, |_, _| {
                    chose = true;
                    agent_action.unwrap_or(usize::MAX)
                })?;
                if chose != agent_action.is_some() {
                    return Err(HitlError::Log(format!("turn {turn_id} of {session_id} does not replay")));
                }
            }
            LogEvent::Feedback { record } => {
                let entry = self.entry(&record.session_id)?;
                let mut entry = entry.lock().expect("session lock");
                let (replayed, experiences) = entry.session.finalize(&self.domain, record.success, record.reason)?;
                if replayed.turns != record.turns {
                    return Err(HitlError::Log(format!("feedback of {} does not replay", record.session_id)));
                }
                if !experiences.is_empty() {
                    self.runs[entry.session.run].submit(experiences, record.success);
                }
            }
        }
        Ok(())
    }
}
