//! Dialogue state tracking and the fixed-length state encoding fed to the
//! Q-network and the world model.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::domain::{ActionSet, DialogueAct, Intent, KnowledgeBase, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    User,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueState {
    pub last_user_act: DialogueAct,
    pub last_agent_act: Option<DialogueAct>,
    /// Constraints the user has expressed so far.
    pub user_informed: BTreeMap<Slot, String>,
    pub agent_informed: BTreeMap<Slot, String>,
    /// Slots the user asked for that the agent has not informed yet.
    pub user_requested: BTreeSet<Slot>,
    pub turn_count: u32,
    pub kb_match_count: usize,
    pub terminated: bool,
}

impl DialogueState {
    /// State after the user's opening act.
    pub fn new(opening: &DialogueAct, kb: &KnowledgeBase) -> Self {
        let mut state = DialogueState {
            last_user_act: opening.clone(),
            last_agent_act: None,
            user_informed: BTreeMap::new(),
            agent_informed: BTreeMap::new(),
            user_requested: BTreeSet::new(),
            turn_count: 0,
            kb_match_count: kb.len(),
            terminated: false,
        };
        state.update(opening, Actor::User, kb);
        state
    }

    pub fn update(&mut self, act: &DialogueAct, actor: Actor, kb: &KnowledgeBase) {
        match actor {
            Actor::User => {
                for (slot, value) in &act.inform_slots {
                    self.user_informed.insert(*slot, value.clone());
                }
                for slot in &act.request_slots {
                    if !self.agent_informed.contains_key(slot) {
                        self.user_requested.insert(*slot);
                    }
                }
                self.last_user_act = act.clone();
            }
            Actor::Agent => {
                for (slot, value) in &act.inform_slots {
                    self.agent_informed.insert(*slot, value.clone());
                    self.user_requested.remove(slot);
                    if *slot == Slot::TaskComplete {
                        self.user_requested.remove(&Slot::Ticket);
                    }
                }
                self.last_agent_act = Some(act.clone());
                self.turn_count += 1;
            }
        }
        self.kb_match_count = kb.count(&self.user_informed);
    }

    /// Records an explicit termination signal from the environment.
    pub fn mark_terminal(&mut self) {
        self.terminated = true;
    }

    pub fn ticket_informed(&self) -> bool {
        self.agent_informed.contains_key(&Slot::TaskComplete)
    }

    pub fn is_terminal(&self, max_turns: u32) -> bool {
        let closed = matches!(self.last_user_act.intent, Intent::Closing | Intent::Thanks);
        self.terminated || self.turn_count >= max_turns || (closed && self.ticket_informed())
    }
}

/// Number of knowledge-base match-count bins: {0, 1, 2-4, 5-19, 20-99, >=100}.
pub const KB_BINS: usize = 6;

pub fn kb_bin(count: usize) -> usize {
    match count {
        0 => 0,
        1 => 1,
        2..=4 => 2,
        5..=19 => 3,
        20..=99 => 4,
        _ => 5,
    }
}

/// Encodes a [`DialogueState`] as a vector with every entry in `[0, 1]`.
///
/// Layout: user intent one-hot (11), user inform bag (16), open user request
/// bag (16), last agent action one-hot (|A|, all zero before the first agent
/// turn), agent inform bag (16), turn count / L (1), kb match-count bin (6).
#[derive(Debug, Clone, PartialEq)]
pub struct StateEncoder {
    agent_actions: ActionSet,
    max_turns: u32,
}

impl StateEncoder {
    pub fn new(agent_actions: ActionSet, max_turns: u32) -> Self {
        assert!(max_turns >= 1, "max_turns must be >= 1");
        StateEncoder {
            agent_actions,
            max_turns,
        }
    }

    pub fn dim(&self) -> usize {
        Intent::ALL.len() + 3 * Slot::ALL.len() + self.agent_actions.len() + 1 + KB_BINS
    }

    pub fn agent_actions(&self) -> &ActionSet {
        &self.agent_actions
    }

    pub fn max_turns(&self) -> u32 {
        self.max_turns
    }

    pub fn encode(&self, state: &DialogueState) -> Vec<f64> {
        let n_slots = Slot::ALL.len();
        let mut v = vec![0.0; self.dim()];
        let mut offset = 0;
        v[offset + state.last_user_act.intent.index()] = 1.0;
        offset += Intent::ALL.len();
        for slot in state.user_informed.keys() {
            v[offset + slot.index()] = 1.0;
        }
        offset += n_slots;
        for slot in &state.user_requested {
            v[offset + slot.index()] = 1.0;
        }
        offset += n_slots;
        if let Some(id) = state
            .last_agent_act
            .as_ref()
            .and_then(|act| self.agent_actions.template_of(act))
        {
            v[offset + id] = 1.0;
        }
        offset += self.agent_actions.len();
        for slot in state.agent_informed.keys() {
            v[offset + slot.index()] = 1.0;
        }
        offset += n_slots;
        v[offset] = (state.turn_count as f64 / self.max_turns as f64).min(1.0);
        offset += 1;
        v[offset + kb_bin(state.kb_match_count)] = 1.0;
        v
    }
}
