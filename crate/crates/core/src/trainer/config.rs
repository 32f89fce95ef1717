use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use crate::domain::{GoalConfig, KbConfig};
use crate::error::{Error, Result};
use crate::nn::OptimizerKind;
use crate::world_model::UserActionMode;

/// Agent variants compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Direct reinforcement learning only.
    Dqn,
    /// Direct RL, world-model learning and K planning dialogues per epoch.
    Ddq,
    /// DDQ whose world model starts untrained.
    DdqRandInit,
    /// DDQ whose pretrained world model is never updated.
    DdqFixedWm,
    /// DQN with K extra real dialogues per epoch.
    DqnK,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Dqn,
        Variant::Ddq,
        Variant::DdqRandInit,
        Variant::DdqFixedWm,
        Variant::DqnK,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Dqn => "dqn",
            Variant::Ddq => "ddq",
            Variant::DdqRandInit => "ddq_rand_init",
            Variant::DdqFixedWm => "ddq_fixed_wm",
            Variant::DqnK => "dqn_k",
        }
    }

    pub fn from_name(name: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == name)
    }

    /// Human-readable label such as `DDQ(10, fixed θ_M)`.
    pub fn label(self, k: usize) -> String {
        match self {
            Variant::Dqn => "DQN".to_string(),
            Variant::Ddq => format!("DDQ({k})"),
            Variant::DdqRandInit => format!("DDQ({k}, rand-init θ_M)"),
            Variant::DdqFixedWm => format!("DDQ({k}, fixed θ_M)"),
            Variant::DqnK => format!("DQN({k})"),
        }
    }

    pub fn plans(self) -> bool {
        matches!(self, Variant::Ddq | Variant::DdqRandInit | Variant::DdqFixedWm)
    }

    pub fn learns_world_model(self) -> bool {
        matches!(self, Variant::Ddq | Variant::DdqRandInit)
    }

    pub fn pretrains_world_model(self) -> bool {
        matches!(self, Variant::Ddq | Variant::DdqFixedWm)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Lowers K during late training: when the mean evaluation success rate of
/// the last `window` evaluations exceeds `threshold`, K is halved (floor 1)
/// and the window restarts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealConfig {
    pub enabled: bool,
    pub threshold: f64,
    pub window: usize,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            enabled: true,
            threshold: 0.7,
            window: 10,
        }
    }
}

/// World-model pretraining on rule-based-agent dialogues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub dialogues: usize,
    /// Probability that a corpus turn uses a random agent action instead of
    /// the rule-based agent's.
    pub explore: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            dialogues: 100,
            explore: 0.0,
            epochs: 50,
            learning_rate: 1e-3,
        }
    }
}

/// Knowledge base, goal database and simulated-user behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DomainConfig {
    /// Seed for the knowledge base and goal database, shared by all runs.
    pub seed: u64,
    pub kb: KbConfig,
    pub goals: GoalConfig,
    pub patience: u32,
    pub request_open_prob: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            seed: 7,
            kb: KbConfig::default(),
            goals: GoalConfig::default(),
            patience: 4,
            request_open_prob: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    /// N.
    pub epochs: usize,
    /// K: planning dialogues per epoch (extra real dialogues for `dqn_k`).
    pub planning_steps: usize,
    /// L.
    pub max_turns: u32,
    /// C, in epochs.
    pub target_sync_every: usize,
    /// Z.
    pub update_steps: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub rbs_dialogues: usize,
    /// Minibatch Q-learning steps on the spiked buffer before epoch 1.
    pub warm_start_steps: usize,
    pub variant: Variant,
    pub eval_every: usize,
    pub eval_dialogues: usize,
    pub seed: u64,
    /// Update rule for both the Q-network and the world model.
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    /// Maximum L2 norm of a Q-learning gradient; unclipped when absent.
    pub grad_clip: Option<f64>,
    pub wm_learning_rate: f64,
    pub hidden: usize,
    pub user_action_mode: UserActionMode,
    /// Simulated turns the world model predicts as non-terminal receive the
    /// per-turn reward instead of the predicted one.
    pub ground_continue_reward: bool,
    pub anneal: AnnealConfig,
    pub pretrain: PretrainConfig,
    pub domain: DomainConfig,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            epochs: 300,
            planning_steps: 5,
            max_turns: 40,
            target_sync_every: 1,
            update_steps: 1,
            gamma: 0.95,
            epsilon: 0.1,
            batch_size: 16,
            buffer_capacity: 5000,
            rbs_dialogues: 100,
            warm_start_steps: 0,
            variant: Variant::Ddq,
            eval_every: 5,
            eval_dialogues: 500,
            seed: 0,
            optimizer: OptimizerKind::RmsProp,
            learning_rate: 3e-3,
            grad_clip: None,
            wm_learning_rate: 1e-3,
            hidden: 80,
            user_action_mode: UserActionMode::Argmax,
            ground_continue_reward: true,
            anneal: AnnealConfig::default(),
            pretrain: PretrainConfig::default(),
            domain: DomainConfig::default(),
        }
    }
}

impl TrainerConfig {
    pub fn for_variant(variant: Variant, k: usize) -> Self {
        TrainerConfig {
            variant,
            planning_steps: if variant == Variant::Dqn { 0 } else { k },
            ..TrainerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.variant == Variant::Dqn && self.planning_steps != 0 {
            return fail("the dqn variant requires K = 0");
        }
        if self.variant != Variant::Dqn && self.planning_steps == 0 {
            return fail("K = 0 is the dqn variant; use variant = \"dqn\"");
        }
        if self.update_steps == 0 {
            return fail("Z must be >= 1");
        }
        if self.max_turns == 0 {
            return fail("L must be >= 1");
        }
        if self.target_sync_every == 0 {
            return fail("C must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return fail("epsilon must lie in [0, 1]");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return fail("batch size must be >= 1 and no larger than the buffer");
        }
        if self.learning_rate <= 0.0 || self.wm_learning_rate <= 0.0 || self.pretrain.learning_rate <= 0.0 {
            return fail("learning rates must be positive");
        }
        if self.eval_dialogues == 0 || self.eval_every == 0 {
            return fail("evaluation needs eval_every >= 1 and eval_dialogues >= 1");
        }
        if !(0.0..=1.0).contains(&self.pretrain.explore) {
            return fail("pretrain.explore must lie in [0, 1]");
        }
        if self.hidden == 0 {
            return fail("hidden size must be >= 1");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: TrainerConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
