//! Agenda-based simulated user for movie-ticket booking, the reward
//! definition, and the naive rule-based agent used to spike the replay buffer.

use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;

use crate::domain::{
    ActionSet, DialogueAct, Intent, KnowledgeBase, Slot, UserGoal, KB_SLOTS, NO_MATCH,
};
use crate::error::Result;
use crate::tracker::{Actor, DialogueState};

/// Per-turn penalty plus terminal success/failure rewards derived from `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub max_turns: u32,
    pub success_reward: f64,
    pub failure_reward: f64,
    pub per_turn: f64,
}

impl RewardConfig {
    /// Success `2L`, failure `-L`, `-1` per turn.
    pub fn new(max_turns: u32) -> Self {
        RewardConfig {
            max_turns,
            success_reward: 2.0 * max_turns as f64,
            failure_reward: -(max_turns as f64),
            per_turn: -1.0,
        }
    }

    /// Reward of one agent turn; the terminal bonus is added on top of the
    /// step penalty.
    pub fn reward_for(&self, event: TurnEvent) -> f64 {
        match event {
            TurnEvent::Continue => self.per_turn,
            TurnEvent::Success => self.per_turn + self.success_reward,
            TurnEvent::Failure => self.per_turn + self.failure_reward,
        }
    }
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig::new(40)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnEvent {
    Continue,
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulatorConfig {
    pub max_turns: u32,
    /// The user gives up after this many identical consecutive agent acts.
    pub patience: u32,
    /// Probability that the opening act is a request rather than an inform.
    pub request_open_prob: f64,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        SimulatorConfig {
            max_turns: 40,
            patience: 4,
            request_open_prob: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgendaItem {
    Inform(Slot),
    Request(Slot),
}

/// A ticket the agent booked: knowledge-base row and ticket count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Booking {
    pub row: Option<usize>,
    pub tickets: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorSession {
    pub goal: UserGoal,
    pub agenda: VecDeque<AgendaItem>,
    /// Constraint slots the user has already told the agent.
    pub constraints_confirmed: BTreeSet<Slot>,
    pub requests_fulfilled: BTreeMap<Slot, String>,
    /// Latest value the agent informed for each slot.
    pub agent_informed: BTreeMap<Slot, String>,
    pub booking: Option<Booking>,
    pub turn: u32,
    pub done: bool,
    last_agent_act: Option<DialogueAct>,
    repeats: u32,
}

impl SimulatorSession {
    pub fn is_done(&self) -> bool {
        self.done
    }
}

/// Opening user act: either `request(r; c1=.., ..)` with one request slot
/// from the goal's requests and at least one constraint, or an inform of
/// constraints only.
pub fn open_dialogue<R: Rng + ?Sized>(goal: &UserGoal, request_prob: f64, rng: &mut R) -> DialogueAct {
    let constraint_slots: Vec<Slot> = goal.constraints.keys().copied().collect();
    let count = rng.gen_range(1..=constraint_slots.len().max(1)).min(constraint_slots.len());
    let chosen = constraint_slots.choose_multiple(rng, count);
    let mut act = if rng.gen_bool(request_prob) && !goal.requests.is_empty() {
        let slot = *goal.requests.iter().choose(rng).expect("non-empty requests");
        DialogueAct::request(slot)
    } else {
        DialogueAct::new(Intent::Inform)
    };
    for slot in chosen {
        act.inform_slots.insert(*slot, goal.constraints[slot].clone());
    }
    act
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UserSimulator {
    pub config: SimulatorConfig,
}

impl UserSimulator {
    pub fn new(config: SimulatorConfig) -> Self {
        UserSimulator { config }
    }

    pub fn rewards(&self) -> RewardConfig {
        RewardConfig::new(self.config.max_turns)
    }

    /// Starts a session for `goal` and returns it with the user's opening act.
    pub fn start<R: Rng + ?Sized>(&self, goal: &UserGoal, rng: &mut R) -> (SimulatorSession, DialogueAct) {
        let opening = open_dialogue(goal, self.config.request_open_prob, rng);
        let mut pending: Vec<Slot> = goal
            .constraints
            .keys()
            .filter(|s| !opening.inform_slots.contains_key(s))
            .copied()
            .collect();
        pending.shuffle(rng);
        let mut requests: Vec<Slot> = goal.requests.iter().filter(|s| **s != Slot::Ticket).copied().collect();
        requests.shuffle(rng);
        let agenda = pending
            .into_iter()
            .map(AgendaItem::Inform)
            .chain(requests.into_iter().map(AgendaItem::Request))
            .chain(std::iter::once(AgendaItem::Request(Slot::Ticket)))
            .collect();
        let session = SimulatorSession {
            goal: goal.clone(),
            agenda,
            constraints_confirmed: opening.inform_slots.keys().copied().collect(),
            requests_fulfilled: BTreeMap::new(),
            agent_informed: BTreeMap::new(),
            booking: None,
            turn: 0,
            done: false,
            last_agent_act: None,
            repeats: 0,
        };
        (session, opening)
    }

    /// The user's reply to one agent act, and whether the dialogue is over.
    pub fn respond<R: Rng + ?Sized>(
        &self,
        session: &mut SimulatorSession,
        agent_act: &DialogueAct,
        kb: &KnowledgeBase,
        _rng: &mut R,
    ) -> (DialogueAct, bool) {
        assert!(!session.done, "respond called on a finished session");
        session.turn += 1;
        if session.last_agent_act.as_ref() == Some(agent_act) {
            session.repeats += 1;
        } else {
            session.repeats = 1;
            session.last_agent_act = Some(agent_act.clone());
        }
        for (slot, value) in &agent_act.inform_slots {
            if *slot != Slot::TaskComplete {
                session.agent_informed.insert(*slot, value.clone());
            }
        }

        let (reply, mut done) = if session.repeats >= self.config.patience {
            (DialogueAct::new(Intent::Closing), true)
        } else {
            match agent_act.intent {
                Intent::Closing => (DialogueAct::new(Intent::Closing), true),
                Intent::Request => {
                    let slot = agent_act.request_slots.iter().next().copied();
                    match slot.and_then(|s| session.goal.constraints.get(&s).map(|v| (s, v.clone()))) {
                        Some((s, v)) => {
                            session.constraints_confirmed.insert(s);
                            (DialogueAct::inform(s, v), false)
                        }
                        None => (DialogueAct::new(Intent::NotSure), false),
                    }
                }
                Intent::Inform if agent_act.inform_slots.contains_key(&Slot::TaskComplete) => {
                    let value = &agent_act.inform_slots[&Slot::TaskComplete];
                    session.booking = Some(Booking {
                        row: value.parse().ok(),
                        tickets: agent_act.inform_slots.get(&Slot::NumberOfPeople).cloned(),
                    });
                    session.requests_fulfilled.insert(Slot::Ticket, value.clone());
                    let reply = if judge(session, kb) {
                        DialogueAct::new(Intent::Thanks)
                    } else {
                        DialogueAct::new(Intent::Closing)
                    };
                    (reply, true)
                }
                Intent::Inform => {
                    let mut contradicted = None;
                    for (slot, value) in &agent_act.inform_slots {
                        if let Some(expected) = session.goal.constraints.get(slot) {
                            if expected != value {
                                contradicted = Some((*slot, expected.clone()));
                            }
                        }
                        if session.goal.requests.contains(slot) {
                            session.requests_fulfilled.insert(*slot, value.clone());
                        }
                    }
                    match contradicted {
                        Some((slot, correct)) => {
                            session.constraints_confirmed.insert(slot);
                            (DialogueAct::new(Intent::Deny).with_inform(slot, correct), false)
                        }
                        None => (next_agenda_act(session), false),
                    }
                }
                _ => (next_agenda_act(session), false),
            }
        };
        if session.turn >= self.config.max_turns {
            done = true;
        }
        session.done = done;
        (reply, done)
    }

    pub fn judge(&self, session: &SimulatorSession, kb: &KnowledgeBase) -> bool {
        judge(session, kb)
    }
}

/// Pops the agenda: the next untold constraint, else the first unfulfilled
/// request (re-asked until the agent informs it).
fn next_agenda_act(session: &mut SimulatorSession) -> DialogueAct {
    while let Some(item) = session.agenda.front().copied() {
        match item {
            AgendaItem::Inform(slot) => {
                session.agenda.pop_front();
                if session.constraints_confirmed.insert(slot) {
                    return DialogueAct::inform(slot, session.goal.constraints[&slot].clone());
                }
            }
            AgendaItem::Request(slot) => {
                if session.requests_fulfilled.contains_key(&slot) {
                    session.agenda.pop_front();
                } else {
                    return DialogueAct::request(slot);
                }
            }
        }
    }
    DialogueAct::request(Slot::Ticket)
}

/// Success iff a ticket was booked on a row satisfying every goal constraint,
/// every requested slot was informed consistently with that row, the ticket
/// count matches, and no informed value contradicts a constraint.
pub fn judge(session: &SimulatorSession, kb: &KnowledgeBase) -> bool {
    let goal = &session.goal;
    let Some(booking) = &session.booking else {
        return false;
    };
    let Some(row) = booking.row.and_then(|i| kb.row(i)) else {
        return false;
    };
    if !goal.requests.iter().all(|s| session.requests_fulfilled.contains_key(s)) {
        return false;
    }
    let contradiction = session
        .agent_informed
        .iter()
        .any(|(s, v)| goal.constraints.get(s).is_some_and(|c| c != v));
    if contradiction || !row.matches(&goal.constraints) {
        return false;
    }
    let consistent = session
        .requests_fulfilled
        .iter()
        .filter(|(s, _)| KB_SLOTS.contains(s))
        .all(|(s, v)| row.get(*s) == Some(v.as_str()));
    consistent && booking.tickets.as_deref() == goal.constraints.get(&Slot::NumberOfPeople).map(String::as_str)
}

/// Deterministic hand-written agent: asks for the required slots in a fixed
/// order, then answers the user's requests, then books.
#[derive(Debug, Clone, Default)]
pub struct RuleBasedAgent {
    asked: BTreeSet<Slot>,
}

const RULE_ORDER: [Slot; 5] = [
    Slot::MovieName,
    Slot::Date,
    Slot::StartTime,
    Slot::NumberOfPeople,
    Slot::Theater,
];

impl RuleBasedAgent {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        self.asked.clear();
    }

    /// Chosen agent action template id.
    pub fn choose(&mut self, state: &DialogueState, actions: &ActionSet) -> usize {
        let (intent, slot) = self.next(state);
        actions
            .find(intent, slot)
            .expect("rule-based agent only uses templates of the agent action set")
    }

    fn next(&mut self, state: &DialogueState) -> (Intent, Option<Slot>) {
        for slot in RULE_ORDER {
            if !state.user_informed.contains_key(&slot)
                && !state.user_requested.contains(&slot)
                && !self.asked.contains(&slot)
            {
                self.asked.insert(slot);
                return (Intent::Request, Some(slot));
            }
        }
        if let Some(slot) = state.user_requested.iter().find(|s| **s != Slot::Ticket) {
            return (Intent::Inform, Some(*slot));
        }
        if !state.ticket_informed() {
            return (Intent::Inform, Some(Slot::TaskComplete));
        }
        (Intent::Closing, None)
    }
}

/// One line of an exported dialogue transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub turn: u32,
    pub actor: Actor,
    pub act: DialogueAct,
    /// Reward of the agent turn this user act answered.
    pub reward: Option<f64>,
}

pub fn write_transcript<W: Write>(out: &mut W, entries: &[TranscriptEntry]) -> Result<()> {
    crate::domain::jsonl::write_to(out, "ddq-transcript", entries)
}

pub fn read_transcript<R: std::io::BufRead>(input: R) -> Result<Vec<TranscriptEntry>> {
    crate::domain::jsonl::read_from(input, "ddq-transcript")
}

/// Fills a user action template with values from the goal, as the world
/// model's predicted user act.
pub fn user_act_from_template(template: &crate::domain::ActionTemplate, goal: &UserGoal) -> DialogueAct {
    match (template.intent, template.slot) {
        (Intent::Request, Some(slot)) => DialogueAct::request(slot),
        (Intent::Inform, Some(slot)) => {
            let value = goal.constraints.get(&slot).cloned().unwrap_or_else(|| NO_MATCH.to_string());
            DialogueAct::inform(slot, value)
        }
        (intent, _) => DialogueAct::new(intent),
    }
}
