//! Deep Dyna-Q training loop: direct reinforcement learning on real
//! dialogues, world-model learning, and planning against the world model.

mod config;
mod episode;

pub use config::{AnnealConfig, DomainConfig, PretrainConfig, TrainerConfig, Variant};
pub use episode::{run_dialogue, run_exploring_rule_dialogue, run_rule_dialogue, Domain, EpisodeTrace, TurnRecord};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

use crate::domain::sample_user_goal;
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, Optimizer};
use crate::policy::{
    realize_agent_act, select_action, sync_target, td_loss_and_gradient, Experience, Origin,
    QNetwork, ReplayBuffer,
};
use crate::simulator::{open_dialogue, user_act_from_template, TurnEvent};
use crate::tracker::{Actor, DialogueState};
use crate::world_model::{pretrain, world_model_step, TaskLosses, WorldModel, WorldModelOptimizer};

const STREAM_INIT: u64 = 0;
const STREAM_RBS: u64 = 1;
const STREAM_PRETRAIN: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_EVAL: u64 = 1 << 32;

/// Independent random stream `stream` of run `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub success_rate: f64,
    pub avg_reward: f64,
    pub avg_turns: f64,
}

impl EvalMetrics {
    pub fn from_traces(traces: &[EpisodeTrace]) -> Self {
        let n = traces.len().max(1) as f64;
        EvalMetrics {
            success_rate: traces.iter().filter(|t| t.success).count() as f64 / n,
            avg_reward: traces.iter().map(EpisodeTrace::total_reward).sum::<f64>() / n,
            avg_turns: traces.iter().map(|t| t.len() as f64).sum::<f64>() / n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub variant: Variant,
    /// K in effect during this epoch.
    pub k: usize,
    pub real_dialogues: usize,
    pub simulated_dialogues: usize,
    pub train_success_rate: f64,
    pub train_reward: f64,
    pub q_loss: Option<f64>,
    pub wm_losses: Option<TaskLosses>,
    pub eval: Option<EvalMetrics>,
}

/// Counters that let callers check which parameters and buffers each phase
/// touched.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub direct_updates: u64,
    pub planning_updates: u64,
    pub world_model_updates: u64,
    /// Minibatches containing an experience from the wrong buffer.
    pub origin_violations: u64,
}

pub struct Trainer {
    config: TrainerConfig,
    domain: Arc<Domain>,
    qnet: QNetwork,
    target: QNetwork,
    world_model: WorldModel,
    q_optimizer: Optimizer,
    wm_optimizer: WorldModelOptimizer,
    real: ReplayBuffer,
    simulated: ReplayBuffer,
    k: usize,
    epoch: usize,
    rng: ChaCha8Rng,
    recent_evals: Vec<f64>,
    audit: Audit,
}

impl Trainer {
    pub fn new(config: TrainerConfig) -> Result<Self> {
        config.validate()?;
        let domain = Domain::build(&config.domain, config.max_turns)?;
        Self::with_domain(config, Arc::new(domain))
    }

    /// Builds the networks, fills the real-experience buffer with
    /// rule-based-agent dialogues and, for variants that use one, pretrains
    /// the world model.
    pub fn with_domain(config: TrainerConfig, domain: Arc<Domain>) -> Result<Self> {
        config.validate()?;
        if domain.max_turns() != config.max_turns {
            return Err(Error::Config("domain and trainer disagree on L".into()));
        }
        let dim = domain.state_dim();
        let n_agent = domain.agent_actions.len();
        let n_user = domain.user_actions.len();
        let mut init = stream_rng(config.seed, STREAM_INIT);
        let qnet = QNetwork::new(dim, config.hidden, n_agent, &mut init);
        let world_model = WorldModel::new(dim, n_agent, n_user, config.hidden, &mut init);
        let mut trainer = Trainer {
            target: qnet.clone(),
            qnet,
            world_model,
            q_optimizer: Optimizer::new(config.optimizer),
            wm_optimizer: WorldModelOptimizer::new(config.optimizer),
            real: ReplayBuffer::new(config.buffer_capacity),
            simulated: ReplayBuffer::new(config.buffer_capacity),
            k: config.planning_steps,
            epoch: 0,
            rng: stream_rng(config.seed, STREAM_TRAIN),
            recent_evals: Vec::new(),
            audit: Audit::default(),
            domain,
            config,
        };
        trainer.rbs_initialize()?;
        if trainer.config.variant.pretrains_world_model() {
            trainer.pretrain_world_model()?;
        }
        trainer.warm_start()?;
        Ok(trainer)
    }

    fn rbs_initialize(&mut self) -> Result<()> {
        let mut rng = stream_rng(self.config.seed, STREAM_RBS);
        for _ in 0..self.config.rbs_dialogues {
            let trace = run_rule_dialogue(&self.domain, &mut rng)?;
            for e in trace.experiences(Origin::Real) {
                self.real.push(e);
            }
        }
        Ok(())
    }

    fn pretrain_world_model(&mut self) -> Result<()> {
        let mut rng = stream_rng(self.config.seed, STREAM_PRETRAIN);
        let mut corpus = Vec::new();
        for _ in 0..self.config.pretrain.dialogues {
            corpus.extend(
                run_exploring_rule_dialogue(&self.domain, self.config.pretrain.explore, &mut rng)?
                    .experiences(Origin::Real),
            );
        }
        let p = self.config.pretrain;
        let mut optimizer = WorldModelOptimizer::new(self.config.optimizer);
        pretrain(
            &mut self.world_model,
            &mut optimizer,
            &corpus,
            p.epochs,
            self.config.batch_size,
            p.learning_rate,
            &mut rng,
        )
    }

    fn warm_start(&mut self) -> Result<()> {
        for i in 0..self.config.warm_start_steps {
            self.q_step(Origin::Real)?;
            if (i + 1) % 100 == 0 {
                sync_target(&self.qnet, &mut self.target);
            }
        }
        sync_target(&self.qnet, &mut self.target);
        Ok(())
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.config
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn qnet(&self) -> &QNetwork {
        &self.qnet
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn world_model(&self) -> &WorldModel {
        &self.world_model
    }

    pub fn real_buffer(&self) -> &ReplayBuffer {
        &self.real
    }

    pub fn simulated_buffer(&self) -> &ReplayBuffer {
        &self.simulated
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn audit(&self) -> &Audit {
        &self.audit
    }

    pub fn label(&self) -> String {
        self.config.variant.label(self.config.planning_steps)
    }

    /// One minibatch Q-learning step on the buffer for `origin`.
    fn q_step(&mut self, origin: Origin) -> Result<Option<f64>> {
        let buffer = match origin {
            Origin::Real => &self.real,
            Origin::Simulated => &self.simulated,
        };
        let Some(batch) = buffer.sample(self.config.batch_size, &mut self.rng) else {
            return Ok(None);
        };
        if batch.iter().any(|e| e.origin != origin) {
            self.audit.origin_violations += 1;
        }
        let (loss, mut grads) = td_loss_and_gradient(&self.qnet, &self.target, &batch, self.config.gamma);
        if let Some(max_norm) = self.config.grad_clip {
            grads.clip_norm(max_norm);
        }
        self.q_optimizer
            .step(self.qnet.mlp_mut(), &grads, self.config.learning_rate)?;
        match origin {
            Origin::Real => self.audit.direct_updates += 1,
            Origin::Simulated => self.audit.planning_updates += 1,
        }
        Ok(Some(loss))
    }

    /// Direct RL: one ε-greedy dialogue with the simulated user, stored in
    /// the real-experience buffer.
    pub fn run_direct_episode(&mut self) -> Result<EpisodeTrace> {
        let epsilon = self.config.epsilon;
        let qnet = &self.qnet;
        let trace = run_dialogue(&self.domain, &mut self.rng, |_, s, rng| {
            select_action(qnet, s, epsilon, rng)
        })?;
        for e in trace.experiences(Origin::Real) {
            self.real.push(e);
        }
        Ok(trace)
    }

    /// Adds a completed real dialogue collected elsewhere (for example from a
    /// human) to the real-experience buffer.
    pub fn commit_real_experiences(&mut self, experiences: Vec<Experience>) -> Result<()> {
        for e in experiences {
            if e.origin != Origin::Real {
                return Err(Error::Config("only real experiences can be committed".into()));
            }
            if e.state.len() != self.domain.state_dim() || e.action >= self.qnet.n_actions() {
                return Err(Error::Config("experience does not fit the network shapes".into()));
            }
            self.real.push(e);
        }
        Ok(())
    }

    /// Z direct Q-learning steps on real experience; returns the mean loss.
    pub fn direct_updates(&mut self) -> Result<Option<f64>> {
        let mut losses = Vec::new();
        for _ in 0..self.config.update_steps {
            if let Some(l) = self.q_step(Origin::Real)? {
                losses.push(l);
            }
        }
        Ok(mean(&losses))
    }

    /// Z supervised world-model steps on real experience.
    pub fn world_model_updates(&mut self) -> Result<Option<TaskLosses>> {
        if !self.config.variant.learns_world_model() {
            return Ok(None);
        }
        let mut last = None;
        for _ in 0..self.config.update_steps {
            if let Some(l) = world_model_step(
                &mut self.world_model,
                &mut self.wm_optimizer,
                &self.real,
                self.config.batch_size,
                self.config.wm_learning_rate,
                &mut self.rng,
            )? {
                self.audit.world_model_updates += 1;
                last = Some(l);
            }
        }
        Ok(last)
    }

    /// One simulated dialogue against the world model, written to the
    /// simulated-experience buffer. Returns the number of turns.
    pub fn planning_rollout(&mut self) -> Result<usize> {
        let domain = Arc::clone(&self.domain);
        let goal = sample_user_goal(&mut self.rng, &domain.goals)?.clone();
        let opening = open_dialogue(&goal, domain.request_open_prob, &mut self.rng);
        let mut state = DialogueState::new(&opening, &domain.kb);
        let mut turns = 0;
        let mut terminal = false;
        while !terminal && turns <= self.config.max_turns as usize {
            let s = domain.encoder.encode(&state);
            let action = select_action(&self.qnet, &s, self.config.epsilon, &mut self.rng);
            let template = domain.agent_actions.get(action).expect("action id in range");
            let agent_act = realize_agent_act(template, &state, &domain.kb);
            state.update(&agent_act, Actor::Agent, &domain.kb);
            let turn = self
                .world_model
                .simulate_turn(&s, action, self.config.user_action_mode, &mut self.rng);
            let user_template = domain.user_actions.get(turn.user_action).expect("user action id in range");
            let user_act = user_act_from_template(user_template, &goal);
            state.update(&user_act, Actor::User, &domain.kb);
            if !turn.reward.is_finite() {
                return Err(Error::NonFinite("world-model reward".into()));
            }
            let reward = if self.config.ground_continue_reward && !turn.terminal {
                domain.rewards.reward_for(TurnEvent::Continue)
            } else {
                turn.reward
            };
            self.simulated.push(Experience {
                state: s,
                action,
                reward,
                user_action: turn.user_action,
                next_state: domain.encoder.encode(&state),
                terminal: turn.terminal,
                origin: Origin::Simulated,
            });
            turns += 1;
            terminal = turn.terminal;
        }
        Ok(turns)
    }

    /// K planning rollouts, each followed by Z Q-learning steps on simulated
    /// experience.
    pub fn planning(&mut self) -> Result<usize> {
        if !self.config.variant.plans() {
            return Ok(0);
        }
        for _ in 0..self.k {
            self.planning_rollout()?;
            for _ in 0..self.config.update_steps {
                self.q_step(Origin::Simulated)?;
            }
        }
        Ok(self.k)
    }

    /// Greedy evaluation against the simulated user. Uses its own random
    /// stream keyed by `(seed, epoch)` and leaves the trainer untouched.
    pub fn evaluate(&self, dialogues: usize) -> Result<EvalMetrics> {
        let mut rng = stream_rng(self.config.seed, STREAM_EVAL + self.epoch as u64);
        let qnet = &self.qnet;
        let traces = (0..dialogues)
            .map(|_| run_dialogue(&self.domain, &mut rng, |_, s, _| qnet.greedy(s)))
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalMetrics::from_traces(&traces))
    }

    /// Rule-based agent baseline on the same evaluation stream.
    pub fn evaluate_rule_agent(&self, dialogues: usize) -> Result<EvalMetrics> {
        let mut rng = stream_rng(self.config.seed, STREAM_EVAL + self.epoch as u64);
        let traces = (0..dialogues)
            .map(|_| run_rule_dialogue(&self.domain, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalMetrics::from_traces(&traces))
    }

    fn anneal(&mut self, success_rate: f64) {
        let a = self.config.anneal;
        if !a.enabled || !self.config.variant.plans() || a.window == 0 {
            return;
        }
        self.recent_evals.push(success_rate);
        if self.recent_evals.len() > a.window {
            self.recent_evals.remove(0);
        }
        if self.recent_evals.len() == a.window && mean(&self.recent_evals).unwrap_or(0.0) > a.threshold && self.k > 1 {
            self.k = (self.k / 2).max(1);
            self.recent_evals.clear();
        }
    }

    /// Finishes an epoch after its real dialogues were collected: world-model
    /// learning, planning, target synchronisation.
    pub fn learn_and_plan(&mut self) -> Result<(Option<TaskLosses>, usize)> {
        let wm_losses = self.world_model_updates()?;
        let planned = self.planning()?;
        self.epoch += 1;
        if self.epoch.is_multiple_of(self.config.target_sync_every) {
            sync_target(&self.qnet, &mut self.target);
        }
        Ok((wm_losses, planned))
    }

    pub fn run_epoch(&mut self) -> Result<EpochMetrics> {
        let k = self.k;
        let real_dialogues = match self.config.variant {
            Variant::DqnK => 1 + self.config.planning_steps,
            _ => 1,
        };
        let mut traces = Vec::with_capacity(real_dialogues);
        let mut q_losses = Vec::new();
        for _ in 0..real_dialogues {
            traces.push(self.run_direct_episode()?);
            if let Some(l) = self.direct_updates()? {
                q_losses.push(l);
            }
        }
        let (wm_losses, simulated_dialogues) = self.learn_and_plan()?;
        let train = EvalMetrics::from_traces(&traces);
        let eval = if self.epoch.is_multiple_of(self.config.eval_every) || self.epoch == self.config.epochs {
            let m = self.evaluate(self.config.eval_dialogues)?;
            self.anneal(m.success_rate);
            Some(m)
        } else {
            None
        };
        Ok(EpochMetrics {
            epoch: self.epoch,
            variant: self.config.variant,
            k,
            real_dialogues,
            simulated_dialogues,
            train_success_rate: train.success_rate,
            train_reward: train.avg_reward,
            q_loss: mean(&q_losses),
            wm_losses,
            eval,
        })
    }

    /// Runs the remaining epochs up to `config.epochs`, calling `on_epoch`
    /// after each.
    pub fn train<F: FnMut(&EpochMetrics) -> Result<()>>(&mut self, mut on_epoch: F) -> Result<Vec<EpochMetrics>> {
        let mut all = Vec::new();
        while self.epoch < self.config.epochs {
            let m = self.run_epoch()?;
            on_epoch(&m)?;
            all.push(m);
        }
        Ok(all)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new();
        ckpt.insert("q", self.qnet.mlp());
        ckpt.insert("q.target", self.target.mlp());
        self.world_model.write_checkpoint(&mut ckpt);
        ckpt
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        self.checkpoint().save(path)
    }

    /// Restores network weights from a checkpoint written by
    /// [`Trainer::checkpoint`].
    pub fn load_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<()> {
        let dim = self.domain.state_dim();
        let n_agent = self.domain.agent_actions.len();
        let specs = QNetwork::specs(dim, self.config.hidden, n_agent);
        let q = QNetwork::from_mlp(ckpt.get("q", &specs)?);
        let target = QNetwork::from_mlp(ckpt.get("q.target", &specs)?);
        let wm = WorldModel::from_checkpoint(ckpt, dim, n_agent, self.domain.user_actions.len(), self.config.hidden)?;
        self.qnet = q;
        self.target = target;
        self.world_model = wm;
        Ok(())
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}
