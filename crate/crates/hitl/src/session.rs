//! Per-session dialogue bookkeeping: tracked state, transcript, pending
//! transitions and their conversion into real experience.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

use ddq::domain::{DialogueAct, Intent, UserGoal};
use ddq::policy::{realize_agent_act, Experience, Origin, QNetwork};
use ddq::simulator::{TranscriptEntry, TurnEvent};
use ddq::tracker::{Actor, DialogueState};
use ddq::trainer::{Domain, Variant};

use crate::error::{HitlError, Result};
use crate::learner::Snapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Succeeded,
    Failed,
    Abandoned,
}

impl SessionStatus {
    pub fn is_terminal(self) -> bool {
        self != SessionStatus::Active
    }
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionStatus::Active => "active",
            SessionStatus::Succeeded => "succeeded",
            SessionStatus::Failed => "failed",
            SessionStatus::Abandoned => "abandoned",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackReason {
    UserJudged,
    Abandoned,
    TurnLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub session_id: String,
    pub success: bool,
    pub reason: FeedbackReason,
    /// Number of agent turns T.
    pub turns: usize,
    /// Undiscounted return of the committed episode.
    pub episode_return: f64,
}

/// An agent turn whose user reply may still be missing.
#[derive(Debug, Clone)]
struct PendingTurn {
    state: Vec<f64>,
    action: usize,
    reply: Option<(usize, Vec<f64>)>,
}

/// What a user turn produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TurnOutcome {
    /// The agent answered.
    AgentTurn {
        action: usize,
        act: DialogueAct,
        text: String,
        turn_count: u32,
    },
    /// The user closed the dialogue; feedback is expected next.
    AwaitingFeedback { turn_count: u32 },
    /// The turn limit ended the dialogue as a failure.
    Terminal { feedback: FeedbackRecord },
}

/// One human dialogue served by one training run.
#[derive(Debug, Clone)]
pub struct HitlSession {
    pub session_id: String,
    pub run: usize,
    pub variant: Variant,
    pub k: usize,
    pub goal: UserGoal,
    pub state: Option<DialogueState>,
    pub transcript: Vec<TranscriptEntry>,
    pub status: SessionStatus,
    pub awaiting_feedback: bool,
    pub next_turn_id: u64,
    pub feedback: Option<FeedbackRecord>,
    /// Run epoch of the policy snapshot this session uses throughout.
    pub policy_epoch: usize,
    policy: Arc<QNetwork>,
    pending: Vec<PendingTurn>,
}

/// JSON view of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub run: usize,
    pub variant: Variant,
    pub k: usize,
    pub goal: UserGoal,
    pub status: SessionStatus,
    pub awaiting_feedback: bool,
    pub turn_count: u32,
    pub next_turn_id: u64,
    pub policy_epoch: usize,
    pub transcript: Vec<TranscriptEntry>,
    pub state: Option<DialogueState>,
    pub feedback: Option<FeedbackRecord>,
}

impl HitlSession {
    pub fn new(session_id: String, run: usize, variant: Variant, k: usize, goal: UserGoal, policy: Snapshot) -> Self {
        HitlSession {
            session_id,
            run,
            variant,
            k,
            goal,
            state: None,
            transcript: Vec::new(),
            status: SessionStatus::Active,
            awaiting_feedback: false,
            next_turn_id: 0,
            feedback: None,
            policy_epoch: policy.epoch,
            policy: policy.policy,
            pending: Vec::new(),
        }
    }

    pub fn turn_count(&self) -> u32 {
        self.state.as_ref().map_or(0, |s| s.turn_count)
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            session_id: self.session_id.clone(),
            run: self.run,
            variant: self.variant,
            k: self.k,
            goal: self.goal.clone(),
            status: self.status,
            awaiting_feedback: self.awaiting_feedback,
            turn_count: self.turn_count(),
            next_turn_id: self.next_turn_id,
            policy_epoch: self.policy_epoch,
            transcript: self.transcript.clone(),
            state: self.state.clone(),
            feedback: self.feedback.clone(),
        }
    }

    fn ensure_open(&self) -> Result<()> {
        if self.status.is_terminal() || self.awaiting_feedback {
            return Err(HitlError::SessionClosed {
                session_id: self.session_id.clone(),
                status: self.status,
            });
        }
        Ok(())
    }

    /// Validates the turn id and the act without changing anything.
    pub fn check_turn(&self, domain: &Domain, turn_id: u64, act: &DialogueAct) -> Result<usize> {
        self.ensure_open()?;
        if turn_id < self.next_turn_id {
            return Err(HitlError::DuplicateTurn {
                expected: self.next_turn_id,
                got: turn_id,
            });
        }
        if turn_id > self.next_turn_id {
            return Err(HitlError::OutOfOrderTurn {
                expected: self.next_turn_id,
                got: turn_id,
            });
        }
        act.validate().map_err(|e| HitlError::InvalidAct(e.to_string()))?;
        domain
            .user_actions
            .template_of(act)
            .ok_or_else(|| HitlError::InvalidAct(format!("{act} is not a user action")))
    }

    /// Applies a user act. `choose` picks the agent action from the encoded
    /// state when the agent has to answer. The caller finalizes the session
    /// when a [`TurnOutcome::Terminal`] notice is due; this method only
    /// reports it through `Ok(None)`.
    pub fn apply_user_turn<F>(&mut self, domain: &Domain, turn_id: u64, act: &DialogueAct, choose: F) -> Result<Option<TurnOutcome>>
    where
        F: FnOnce(&QNetwork, &[f64]) -> usize,
    {
        let user_action = self.check_turn(domain, turn_id, act)?;
        let kb = &domain.kb;
        match self.state.as_mut() {
            None => self.state = Some(DialogueState::new(act, kb)),
            Some(state) => {
                state.update(act, Actor::User, kb);
                let next = domain.encoder.encode(state);
                if let Some(last) = self.pending.last_mut() {
                    last.reply = Some((user_action, next));
                }
            }
        }
        self.next_turn_id += 1;
        let state = self.state.as_ref().expect("state exists after a user turn");
        self.transcript.push(TranscriptEntry {
            turn: state.turn_count,
            actor: Actor::User,
            act: act.clone(),
            reward: None,
        });
        if matches!(act.intent, Intent::Closing | Intent::Thanks) {
            self.awaiting_feedback = true;
            return Ok(Some(TurnOutcome::AwaitingFeedback {
                turn_count: state.turn_count,
            }));
        }
        if state.turn_count >= domain.max_turns() {
            return Ok(None);
        }
        let s = domain.encoder.encode(state);
        let action = choose(&self.policy, &s);
        let template = domain
            .agent_actions
            .get(action)
            .ok_or_else(|| HitlError::InvalidAct(format!("agent action {action} out of range")))?;
        let agent_act = realize_agent_act(template, state, kb);
        let state = self.state.as_mut().expect("state exists after a user turn");
        state.update(&agent_act, Actor::Agent, kb);
        self.pending.push(PendingTurn {
            state: s,
            action,
            reply: None,
        });
        self.transcript.push(TranscriptEntry {
            turn: state.turn_count,
            actor: Actor::Agent,
            act: agent_act.clone(),
            reward: None,
        });
        Ok(Some(TurnOutcome::AgentTurn {
            action,
            text: crate::render::agent_text(&agent_act, &domain.kb),
            act: agent_act,
            turn_count: state.turn_count,
        }))
    }

    /// Closes the session, attaching the terminal reward to the final agent
    /// turn. Returns the feedback record and the episode's real experience.
    pub fn finalize(&mut self, domain: &Domain, success: bool, reason: FeedbackReason) -> Result<(FeedbackRecord, Vec<Experience>)> {
        if self.feedback.is_some() {
            return Err(HitlError::DuplicateFeedback(self.session_id.clone()));
        }
        if self.status.is_terminal() {
            return Err(HitlError::SessionClosed {
                session_id: self.session_id.clone(),
                status: self.status,
            });
        }
        let rewards = domain.rewards;
        let mut experiences = Vec::with_capacity(self.pending.len());
        if let Some(state) = self.state.as_mut() {
            if let Some(last) = self.pending.last_mut() {
                if last.reply.is_none() {
                    let closing = DialogueAct::new(if success { Intent::Thanks } else { Intent::Closing });
                    state.update(&closing, Actor::User, &domain.kb);
                    self.transcript.push(TranscriptEntry {
                        turn: state.turn_count,
                        actor: Actor::User,
                        act: closing.clone(),
                        reward: None,
                    });
                    let id = domain.user_actions.template_of(&closing).expect("closing acts have templates");
                    last.reply = Some((id, Vec::new()));
                }
                state.mark_terminal();
                let terminal_state = domain.encoder.encode(state);
                if let Some(reply) = last.reply.as_mut() {
                    reply.1 = terminal_state;
                }
            }
        }
        let n = self.pending.len();
        for (i, p) in self.pending.iter().enumerate() {
            let terminal = i + 1 == n;
            let event = match (terminal, success) {
                (false, _) => TurnEvent::Continue,
                (true, true) => TurnEvent::Success,
                (true, false) => TurnEvent::Failure,
            };
            let (user_action, next_state) = p.reply.clone().expect("every pending turn is answered here");
            experiences.push(Experience {
                state: p.state.clone(),
                action: p.action,
                reward: rewards.reward_for(event),
                user_action,
                next_state,
                terminal,
                origin: Origin::Real,
            });
        }
        let mut reward_iter = experiences.iter().map(|e| e.reward);
        for entry in self.transcript.iter_mut().filter(|e| e.actor == Actor::User).skip(1) {
            entry.reward = reward_iter.next();
        }
        let record = FeedbackRecord {
            session_id: self.session_id.clone(),
            success,
            reason,
            turns: n,
            episode_return: experiences.iter().map(|e| e.reward).sum(),
        };
        self.status = match (reason, success) {
            (FeedbackReason::Abandoned, _) => SessionStatus::Abandoned,
            (_, true) => SessionStatus::Succeeded,
            (_, false) => SessionStatus::Failed,
        };
        self.awaiting_feedback = false;
        self.pending.clear();
        self.feedback = Some(record.clone());
        Ok((record, experiences))
    }
}
