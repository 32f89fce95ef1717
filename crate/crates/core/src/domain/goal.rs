use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{jsonl, KnowledgeBase, Slot};
use crate::error::{Error, Result};

/// Slots that every goal mentions, as a constraint or a request.
pub const REQUIRED_SLOTS: [Slot; 5] = [
    Slot::MovieName,
    Slot::Theater,
    Slot::StartTime,
    Slot::Date,
    Slot::NumberOfPeople,
];

pub const OPTIONAL_SLOTS: [Slot; 7] = [
    Slot::City,
    Slot::State,
    Slot::Zip,
    Slot::TheaterChain,
    Slot::VideoFormat,
    Slot::Price,
    Slot::DistanceConstraints,
];

const FORMAT: &str = "ddq-goals";

/// What the user knows (`constraints`) and what it wants to find out (`requests`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserGoal {
    pub constraints: BTreeMap<Slot, String>,
    pub requests: BTreeSet<Slot>,
}

impl UserGoal {
    pub fn validate(&self) -> Result<()> {
        if !self.requests.contains(&Slot::Ticket) {
            return Err(Error::Config("goal requests must contain ticket".into()));
        }
        for slot in REQUIRED_SLOTS {
            if !self.constraints.contains_key(&slot) && !self.requests.contains(&slot) {
                return Err(Error::Config(format!("goal does not mention required slot {slot}")));
            }
        }
        if let Some(slot) = self.requests.iter().find(|s| self.constraints.contains_key(s)) {
            return Err(Error::Config(format!("{slot} is both a constraint and a request")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalConfig {
    pub goals: usize,
    pub optional_slots: Vec<Slot>,
    /// Probability that each optional slot becomes a constraint.
    pub optional_prob: f64,
    /// Probability that a required slot (other than numberofpeople) is a request.
    pub request_prob: f64,
}

impl Default for GoalConfig {
    fn default() -> Self {
        GoalConfig {
            goals: 200,
            optional_slots: OPTIONAL_SLOTS.to_vec(),
            optional_prob: 0.3,
            request_prob: 0.5,
        }
    }
}

/// Builds goals from knowledge-base rows so every goal is satisfiable.
pub fn build_goal_database<R: Rng + ?Sized>(
    kb: &KnowledgeBase,
    config: &GoalConfig,
    rng: &mut R,
) -> Result<Vec<UserGoal>> {
    if kb.is_empty() {
        return Err(Error::Config("cannot build goals from an empty knowledge base".into()));
    }
    let goals = (0..config.goals)
        .map(|_| {
            let row = &kb.rows()[rng.gen_range(0..kb.len())];
            let mut constraints = BTreeMap::new();
            let mut requests = BTreeSet::new();
            requests.insert(Slot::Ticket);
            for slot in REQUIRED_SLOTS {
                if slot == Slot::NumberOfPeople {
                    constraints.insert(slot, rng.gen_range(1..=6).to_string());
                } else if rng.gen_bool(config.request_prob) {
                    requests.insert(slot);
                } else {
                    constraints.insert(slot, row.get(slot).expect("complete row").to_string());
                }
            }
            for &slot in &config.optional_slots {
                if rng.gen_bool(config.optional_prob) {
                    if let Some(value) = row.get(slot) {
                        constraints.insert(slot, value.to_string());
                    }
                }
            }
            UserGoal {
                constraints,
                requests,
            }
        })
        .collect();
    Ok(goals)
}

/// Uniform draw from the goal database.
pub fn sample_user_goal<'a, R: Rng + ?Sized>(rng: &mut R, goals: &'a [UserGoal]) -> Result<&'a UserGoal> {
    if goals.is_empty() {
        return Err(Error::Config("goal database is empty".into()));
    }
    Ok(&goals[rng.gen_range(0..goals.len())])
}

pub fn save_goal_database(path: &Path, goals: &[UserGoal]) -> Result<()> {
    jsonl::write(path, FORMAT, goals)
}

pub fn load_goal_database(path: &Path) -> Result<Vec<UserGoal>> {
    let goals: Vec<UserGoal> = jsonl::read(path, FORMAT)?;
    for goal in &goals {
        goal.validate()?;
    }
    Ok(goals)
}
