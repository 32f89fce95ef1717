use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    build_goal_database, sample_user_goal, ActionSet, DialogueAct, KnowledgeBase, UserGoal,
};
use crate::error::{Error, Result};
use crate::policy::{realize_agent_act, Experience, Origin};
use crate::simulator::{RewardConfig, RuleBasedAgent, SimulatorConfig, TurnEvent, UserSimulator};
use crate::tracker::{Actor, DialogueState, StateEncoder};

use super::config::DomainConfig;

/// Everything about the task that does not change during training.
#[derive(Debug, Clone)]
pub struct Domain {
    pub kb: KnowledgeBase,
    pub goals: Vec<UserGoal>,
    pub agent_actions: ActionSet,
    pub user_actions: ActionSet,
    pub encoder: StateEncoder,
    pub simulator: UserSimulator,
    pub rewards: RewardConfig,
    pub request_open_prob: f64,
}

impl Domain {
    pub fn build(config: &DomainConfig, max_turns: u32) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let kb = KnowledgeBase::generate(&config.kb, &mut rng);
        let goals = build_goal_database(&kb, &config.goals, &mut rng)?;
        Self::from_parts(kb, goals, config, max_turns)
    }

    pub fn from_parts(
        kb: KnowledgeBase,
        goals: Vec<UserGoal>,
        config: &DomainConfig,
        max_turns: u32,
    ) -> Result<Self> {
        if goals.is_empty() {
            return Err(Error::Config("goal database is empty".into()));
        }
        if !(0.0..=1.0).contains(&config.request_open_prob) {
            return Err(Error::Config("request_open_prob must lie in [0, 1]".into()));
        }
        if config.patience == 0 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        let agent_actions = ActionSet::agent();
        Ok(Domain {
            kb,
            goals,
            encoder: StateEncoder::new(agent_actions.clone(), max_turns),
            agent_actions,
            user_actions: ActionSet::user(),
            simulator: UserSimulator::new(SimulatorConfig {
                max_turns,
                patience: config.patience,
                request_open_prob: config.request_open_prob,
            }),
            rewards: RewardConfig::new(max_turns),
            request_open_prob: config.request_open_prob,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.encoder.dim()
    }

    pub fn max_turns(&self) -> u32 {
        self.rewards.max_turns
    }
}

/// One agent turn and the user's reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub state: Vec<f64>,
    pub action: usize,
    pub agent_act: DialogueAct,
    pub user_act: DialogueAct,
    pub user_action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub goal: UserGoal,
    pub opening: DialogueAct,
    pub turns: Vec<TurnRecord>,
    pub success: bool,
}

impl EpisodeTrace {
    pub fn total_reward(&self) -> f64 {
        self.turns.iter().map(|t| t.reward).sum()
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn experiences(&self, origin: Origin) -> Vec<Experience> {
        self.turns
            .iter()
            .map(|t| Experience {
                state: t.state.clone(),
                action: t.action,
                reward: t.reward,
                user_action: t.user_action,
                next_state: t.next_state.clone(),
                terminal: t.terminal,
                origin,
            })
            .collect()
    }
}

/// Runs one dialogue between an agent policy and the simulated user.
///
/// `choose` receives the tracked state and its encoding and returns an agent
/// action id.
pub fn run_dialogue<R, F>(domain: &Domain, rng: &mut R, mut choose: F) -> Result<EpisodeTrace>
where
    R: Rng + ?Sized,
    F: FnMut(&DialogueState, &[f64], &mut R) -> usize,
{
    let goal = sample_user_goal(rng, &domain.goals)?.clone();
    let (mut session, opening) = domain.simulator.start(&goal, rng);
    let mut state = DialogueState::new(&opening, &domain.kb);
    let mut turns = Vec::new();
    let mut success = false;
    loop {
        let s = domain.encoder.encode(&state);
        let action = choose(&state, &s, rng);
        let template = domain
            .agent_actions
            .get(action)
            .ok_or_else(|| Error::Config(format!("agent action {action} out of range")))?;
        let agent_act = realize_agent_act(template, &state, &domain.kb);
        state.update(&agent_act, Actor::Agent, &domain.kb);
        let (user_act, done) = domain.simulator.respond(&mut session, &agent_act, &domain.kb, rng);
        state.update(&user_act, Actor::User, &domain.kb);
        let event = if done {
            state.mark_terminal();
            success = domain.simulator.judge(&session, &domain.kb);
            if success {
                TurnEvent::Success
            } else {
                TurnEvent::Failure
            }
        } else {
            TurnEvent::Continue
        };
        let user_action = domain
            .user_actions
            .template_of(&user_act)
            .ok_or_else(|| Error::Format(format!("user act {user_act} has no template")))?;
        turns.push(TurnRecord {
            state: s,
            action,
            agent_act,
            user_act,
            user_action,
            reward: domain.rewards.reward_for(event),
            next_state: domain.encoder.encode(&state),
            terminal: done,
        });
        if done {
            break;
        }
    }
    Ok(EpisodeTrace {
        goal,
        opening,
        turns,
        success,
    })
}

/// A dialogue driven by the hand-written rule-based agent.
pub fn run_rule_dialogue<R: Rng + ?Sized>(domain: &Domain, rng: &mut R) -> Result<EpisodeTrace> {
    let mut agent = RuleBasedAgent::new();
    run_dialogue(domain, rng, |state, _, _| agent.choose(state, &domain.agent_actions))
}

/// A rule-based-agent dialogue in which each turn is replaced, with
/// probability `explore`, by a uniformly random agent action.
pub fn run_exploring_rule_dialogue<R: Rng + ?Sized>(
    domain: &Domain,
    explore: f64,
    rng: &mut R,
) -> Result<EpisodeTrace> {
    let mut agent = RuleBasedAgent::new();
    let n = domain.agent_actions.len();
    run_dialogue(domain, rng, |state, _, rng| {
        if rng.gen_bool(explore) {
            rng.gen_range(0..n)
        } else {
            agent.choose(state, &domain.agent_actions)
        }
    })
}
