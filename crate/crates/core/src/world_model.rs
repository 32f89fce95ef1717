//! Learned environment model M(s, a): two shared tanh layers feeding three
//! task heads (user action softmax, scalar reward, termination sigmoid), each
//! head with its own tanh hidden layer.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{Activation, Checkpoint, Gradients, LayerSpec, Mlp, Optimizer, OptimizerKind, OutputGrad};
use crate::policy::{argmax, Experience, Origin, ReplayBuffer};

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub user_action_probs: Vec<f64>,
    pub reward: f64,
    pub term_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskLosses {
    pub user_action: f64,
    pub reward: f64,
    pub termination: f64,
}

impl TaskLosses {
    pub fn total(&self) -> f64 {
        self.user_action + self.reward + self.termination
    }
}

/// Per-task loss weights; `[1, 1, 1]` is the training objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskWeights {
    pub user_action: f64,
    pub reward: f64,
    pub termination: f64,
}

impl TaskWeights {
    pub const UNIT: TaskWeights = TaskWeights {
        user_action: 1.0,
        reward: 1.0,
        termination: 1.0,
    };
    pub const USER_ACTION: TaskWeights = TaskWeights {
        user_action: 1.0,
        reward: 0.0,
        termination: 0.0,
    };
    pub const REWARD: TaskWeights = TaskWeights {
        user_action: 0.0,
        reward: 1.0,
        termination: 0.0,
    };
    pub const TERMINATION: TaskWeights = TaskWeights {
        user_action: 0.0,
        reward: 0.0,
        termination: 1.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserActionMode {
    #[default]
    Argmax,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatedTurn {
    pub user_action: usize,
    pub reward: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModelGradients {
    pub trunk: Gradients,
    pub user_head: Gradients,
    pub reward_head: Gradients,
    pub term_head: Gradients,
}

impl WorldModelGradients {
    /// Flattened in the order of [`WorldModel::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        [&self.trunk, &self.user_head, &self.reward_head, &self.term_head]
            .iter()
            .flat_map(|g| g.flatten())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    trunk: Mlp,
    user_head: Mlp,
    reward_head: Mlp,
    term_head: Mlp,
    state_dim: usize,
    n_agent_actions: usize,
}

struct Specs {
    trunk: Vec<LayerSpec>,
    user: Vec<LayerSpec>,
    reward: Vec<LayerSpec>,
    term: Vec<LayerSpec>,
}

fn specs(state_dim: usize, n_agent: usize, n_user: usize, hidden: usize) -> Specs {
    let head = |out, act| {
        vec![
            LayerSpec::new(hidden, hidden, Activation::Tanh),
            LayerSpec::new(hidden, out, act),
        ]
    };
    Specs {
        trunk: vec![
            LayerSpec::new(state_dim + n_agent, hidden, Activation::Tanh),
            LayerSpec::new(hidden, hidden, Activation::Tanh),
        ],
        user: head(n_user, Activation::Softmax),
        reward: head(1, Activation::Linear),
        term: head(1, Activation::Sigmoid),
    }
}

const CKPT_NAMES: [&str; 4] = ["wm.trunk", "wm.user", "wm.reward", "wm.term"];

impl WorldModel {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        n_agent_actions: usize,
        n_user_actions: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let s = specs(state_dim, n_agent_actions, n_user_actions, hidden);
        WorldModel {
            trunk: Mlp::new(&s.trunk, rng),
            user_head: Mlp::new(&s.user, rng),
            reward_head: Mlp::new(&s.reward, rng),
            term_head: Mlp::new(&s.term, rng),
            state_dim,
            n_agent_actions,
        }
    }

    pub fn zeros(state_dim: usize, n_agent_actions: usize, n_user_actions: usize, hidden: usize) -> Self {
        let s = specs(state_dim, n_agent_actions, n_user_actions, hidden);
        WorldModel {
            trunk: Mlp::zeros(&s.trunk),
            user_head: Mlp::zeros(&s.user),
            reward_head: Mlp::zeros(&s.reward),
            term_head: Mlp::zeros(&s.term),
            state_dim,
            n_agent_actions,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn n_agent_actions(&self) -> usize {
        self.n_agent_actions
    }

    pub fn n_user_actions(&self) -> usize {
        self.user_head.output_dim()
    }

    pub fn hidden(&self) -> usize {
        self.trunk.output_dim()
    }

    pub fn networks(&self) -> [&Mlp; 4] {
        [&self.trunk, &self.user_head, &self.reward_head, &self.term_head]
    }

    fn networks_mut(&mut self) -> [&mut Mlp; 4] {
        [
            &mut self.trunk,
            &mut self.user_head,
            &mut self.reward_head,
            &mut self.term_head,
        ]
    }

    /// Concatenation `(s, onehot(a))`.
    pub fn input(&self, state: &[f64], action: usize) -> Vec<f64> {
        assert_eq!(state.len(), self.state_dim, "state dimension mismatch");
        assert!(action < self.n_agent_actions, "agent action {action} out of range");
        let mut x = Vec::with_capacity(self.state_dim + self.n_agent_actions);
        x.extend_from_slice(state);
        x.resize(self.state_dim + self.n_agent_actions, 0.0);
        x[self.state_dim + action] = 1.0;
        x
    }

    pub fn predict(&self, state: &[f64], action: usize) -> Prediction {
        let h = self.trunk.predict(&self.input(state, action));
        Prediction {
            user_action_probs: self.user_head.predict(&h),
            reward: self.reward_head.predict(&h)[0],
            term_prob: self.term_head.predict(&h)[0],
        }
    }

    pub fn simulate_turn<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        action: usize,
        mode: UserActionMode,
        rng: &mut R,
    ) -> SimulatedTurn {
        let p = self.predict(state, action);
        let user_action = match mode {
            UserActionMode::Argmax => argmax(&p.user_action_probs),
            UserActionMode::Sample => sample_categorical(&p.user_action_probs, rng),
        };
        SimulatedTurn {
            user_action,
            reward: p.reward,
            terminal: p.term_prob > 0.5,
        }
    }

    /// Weighted multi-task loss (batch mean) and its gradient. Shared layers
    /// receive the sum of the task heads' gradients.
    pub fn loss_and_gradient(&self, batch: &[&Experience], weights: TaskWeights) -> (TaskLosses, WorldModelGradients) {
        let n = batch.len() as f64;
        let mut grads = WorldModelGradients {
            trunk: self.trunk.zero_gradients(),
            user_head: self.user_head.zero_gradients(),
            reward_head: self.reward_head.zero_gradients(),
            term_head: self.term_head.zero_gradients(),
        };
        let mut losses = TaskLosses::default();
        for e in batch {
            let trunk_acts = self.trunk.forward(&self.input(&e.state, e.action));
            let h = trunk_acts.output();

            let user_acts = self.user_head.forward(h);
            let probs = user_acts.output();
            losses.user_action += -probs[e.user_action].max(f64::MIN_POSITIVE).ln();
            let mut g_user: Vec<f64> = probs.iter().map(|p| weights.user_action * p / n).collect();
            g_user[e.user_action] -= weights.user_action / n;

            let reward_acts = self.reward_head.forward(h);
            let r_hat = reward_acts.output()[0];
            losses.reward += (r_hat - e.reward).powi(2);
            let g_reward = [weights.reward * 2.0 * (r_hat - e.reward) / n];

            let term_acts = self.term_head.forward(h);
            let q = term_acts.output()[0];
            let t = if e.terminal { 1.0 } else { 0.0 };
            losses.termination += -(t * q.max(f64::MIN_POSITIVE).ln() + (1.0 - t) * (1.0 - q).max(f64::MIN_POSITIVE).ln());
            let g_term = [weights.termination * (q - t) / n];

            let mut dh = self
                .user_head
                .backward_accumulate(&user_acts, OutputGrad::Logits(&g_user), &mut grads.user_head);
            let dh_r = self
                .reward_head
                .backward_accumulate(&reward_acts, OutputGrad::Output(&g_reward), &mut grads.reward_head);
            let dh_t = self
                .term_head
                .backward_accumulate(&term_acts, OutputGrad::Logits(&g_term), &mut grads.term_head);
            for ((a, b), c) in dh.iter_mut().zip(&dh_r).zip(&dh_t) {
                *a += b + c;
            }
            self.trunk
                .backward_accumulate(&trunk_acts, OutputGrad::Output(&dh), &mut grads.trunk);
        }
        losses.user_action /= n;
        losses.reward /= n;
        losses.termination /= n;
        (losses, grads)
    }

    /// Task losses on a batch without computing gradients.
    pub fn losses(&self, batch: &[&Experience]) -> TaskLosses {
        let n = batch.len() as f64;
        let mut losses = TaskLosses::default();
        for e in batch {
            let p = self.predict(&e.state, e.action);
            losses.user_action += -p.user_action_probs[e.user_action].max(f64::MIN_POSITIVE).ln();
            losses.reward += (p.reward - e.reward).powi(2);
            let t = if e.terminal { 1.0 } else { 0.0 };
            losses.termination += -(t * p.term_prob.max(f64::MIN_POSITIVE).ln()
                + (1.0 - t) * (1.0 - p.term_prob).max(f64::MIN_POSITIVE).ln());
        }
        losses.user_action /= n;
        losses.reward /= n;
        losses.termination /= n;
        losses
    }

    pub fn sgd_step(&mut self, grads: &WorldModelGradients, learning_rate: f64) -> Result<()> {
        let all = [&grads.trunk, &grads.user_head, &grads.reward_head, &grads.term_head];
        if !all.iter().all(|g| g.all_finite()) {
            return Err(Error::NonFinite("world-model gradient".into()));
        }
        for (net, g) in self.networks_mut().into_iter().zip(all) {
            net.sgd_step(g, learning_rate)?;
        }
        Ok(())
    }

    /// One update through `optimizer`, which keeps a state per network.
    pub fn optimizer_step(
        &mut self,
        grads: &WorldModelGradients,
        optimizer: &mut WorldModelOptimizer,
        learning_rate: f64,
    ) -> Result<()> {
        let all = [&grads.trunk, &grads.user_head, &grads.reward_head, &grads.term_head];
        if !all.iter().all(|g| g.all_finite()) {
            return Err(Error::NonFinite("world-model gradient".into()));
        }
        for ((net, g), opt) in self.networks_mut().into_iter().zip(all).zip(optimizer.parts.iter_mut()) {
            opt.step(net, g, learning_rate)?;
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.networks().iter().map(|n| n.num_params()).sum()
    }

    /// Trunk, user head, reward head, termination head.
    pub fn flat_params(&self) -> Vec<f64> {
        self.networks().iter().flat_map(|n| n.flat_params()).collect()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.num_params(), "parameter count mismatch");
        let mut offset = 0;
        for net in self.networks_mut() {
            let k = net.num_params();
            net.set_flat_params(&values[offset..offset + k]);
            offset += k;
        }
    }

    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for net in self.networks() {
            hasher.update(net.fingerprint().as_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// Fraction of transitions whose argmax user action equals the stored one.
    pub fn accuracy(&self, data: &[Experience]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data
            .iter()
            .filter(|e| argmax(&self.predict(&e.state, e.action).user_action_probs) == e.user_action)
            .count();
        hits as f64 / data.len() as f64
    }

    pub fn reward_mse(&self, data: &[Experience]) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        data.iter()
            .map(|e| (self.predict(&e.state, e.action).reward - e.reward).powi(2))
            .sum::<f64>()
            / data.len() as f64
    }

    pub fn write_checkpoint(&self, ckpt: &mut Checkpoint) {
        for (name, net) in CKPT_NAMES.iter().zip(self.networks()) {
            ckpt.insert(*name, net);
        }
    }

    pub fn from_checkpoint(
        ckpt: &Checkpoint,
        state_dim: usize,
        n_agent_actions: usize,
        n_user_actions: usize,
        hidden: usize,
    ) -> Result<Self> {
        let s = specs(state_dim, n_agent_actions, n_user_actions, hidden);
        Ok(WorldModel {
            trunk: ckpt.get(CKPT_NAMES[0], &s.trunk)?,
            user_head: ckpt.get(CKPT_NAMES[1], &s.user)?,
            reward_head: ckpt.get(CKPT_NAMES[2], &s.reward)?,
            term_head: ckpt.get(CKPT_NAMES[3], &s.term)?,
            state_dim,
            n_agent_actions,
        })
    }
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Optimizer state for the shared trunk and the three heads.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModelOptimizer {
    parts: [Optimizer; 4],
}

impl WorldModelOptimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        WorldModelOptimizer {
            parts: std::array::from_fn(|_| Optimizer::new(kind)),
        }
    }
}

/// One multi-task SGD step on a minibatch from the real-experience buffer.
/// Returns pre-update losses, or `None` if the buffer is too small.
pub fn world_model_step<R: Rng + ?Sized>(
    model: &mut WorldModel,
    optimizer: &mut WorldModelOptimizer,
    buffer: &ReplayBuffer,
    batch_size: usize,
    learning_rate: f64,
    rng: &mut R,
) -> Result<Option<TaskLosses>> {
    let Some(batch) = buffer.sample(batch_size, rng) else {
        return Ok(None);
    };
    let (losses, grads) = model.loss_and_gradient(&batch, TaskWeights::UNIT);
    model.optimizer_step(&grads, optimizer, learning_rate)?;
    Ok(Some(losses))
}

/// Supervised pretraining: `epochs` shuffled passes of minibatch SGD.
pub fn pretrain<R: Rng + ?Sized>(
    model: &mut WorldModel,
    optimizer: &mut WorldModelOptimizer,
    corpus: &[Experience],
    epochs: usize,
    batch_size: usize,
    learning_rate: f64,
    rng: &mut R,
) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::Config("world-model pretraining corpus is empty".into()));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch_size.max(1)) {
            let batch: Vec<&Experience> = chunk.iter().map(|&i| &corpus[i]).collect();
            let (_, grads) = model.loss_and_gradient(&batch, TaskWeights::UNIT);
            model.optimizer_step(&grads, optimizer, learning_rate)?;
        }
    }
    Ok(())
}

/// Synthetic corpus with a deterministic, learnable response rule:
/// the user action depends on the agent action and two state bits, the
/// reward on two state bits and the action parity, termination on the action.
pub fn rule_corpus<R: Rng + ?Sized>(
    n: usize,
    state_dim: usize,
    n_agent_actions: usize,
    n_user_actions: usize,
    rng: &mut R,
) -> Vec<Experience> {
    assert!(state_dim >= 4, "rule corpus needs at least 4 state features");
    (0..n)
        .map(|_| {
            let state: Vec<f64> = (0..state_dim)
                .map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 })
                .collect();
            let action = rng.gen_range(0..n_agent_actions);
            let bits = 2 * state[0] as usize + state[1] as usize;
            let user_action = (action * 5 + bits) % n_user_actions;
            let reward = 2.0 * state[2] - state[3] - 1.0 + if action % 2 == 0 { 0.5 } else { 0.0 };
            Experience {
                next_state: state.clone(),
                state,
                action,
                reward,
                user_action,
                terminal: action % 4 == 0,
                origin: Origin::Real,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_model_is_uninformative() {
        let m = WorldModel::zeros(6, 3, 5, 8);
        let p = m.predict(&[0.5; 6], 1);
        for q in &p.user_action_probs {
            assert!((q - 0.2).abs() < 1e-12);
        }
        assert_eq!(p.reward, 0.0);
        assert_eq!(p.term_prob, 0.5);
    }

    #[test]
    fn prediction_is_pure_and_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = WorldModel::new(6, 3, 5, 8, &mut rng);
        let s = [0.1, 0.0, 1.0, 0.3, 0.0, 0.9];
        let a = m.predict(&s, 2);
        assert_eq!(a, m.predict(&s, 2));
        assert!((a.user_action_probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(a.term_prob > 0.0 && a.term_prob < 1.0);
        assert!(a.reward.is_finite());
    }

    #[test]
    fn degenerate_distribution_picks_its_template() {
        let mut m = WorldModel::zeros(4, 2, 6, 5);
        // Bias the softmax output layer heavily toward template 3.
        let last = m.user_head.layers_mut().last_mut().unwrap();
        last.bias[3] = 1000.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for mode in [UserActionMode::Argmax, UserActionMode::Sample] {
            assert_eq!(m.simulate_turn(&[0.0; 4], 0, mode, &mut rng).user_action, 3);
        }
    }

    #[test]
    fn termination_threshold() {
        let mut m = WorldModel::zeros(4, 2, 3, 5);
        // sigmoid(b) = 0.7  =>  b = ln(0.7 / 0.3)
        m.term_head.layers_mut().last_mut().unwrap().bias[0] = (0.7f64 / 0.3).ln();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let turn = m.simulate_turn(&[0.0; 4], 1, UserActionMode::Argmax, &mut rng);
        assert!(turn.terminal);
        m.term_head.layers_mut().last_mut().unwrap().bias[0] = (0.3f64 / 0.7).ln();
        assert!(!m.simulate_turn(&[0.0; 4], 1, UserActionMode::Argmax, &mut rng).terminal);
    }

    #[test]
    fn empty_corpus_is_rejected_and_zero_epochs_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = WorldModel::new(4, 2, 3, 5, &mut rng);
        assert!(matches!(pretrain(&mut m, &mut WorldModelOptimizer::new(OptimizerKind::Sgd), &[], 3, 16, 0.1, &mut rng), Err(Error::Config(_))));
        let corpus = rule_corpus(20, 4, 2, 3, &mut rng);
        let before = m.clone();
        pretrain(&mut m, &mut WorldModelOptimizer::new(OptimizerKind::Sgd), &corpus, 0, 16, 0.1, &mut rng).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = WorldModel::new(5, 3, 4, 6, &mut rng);
        let mut ckpt = Checkpoint::new();
        m.write_checkpoint(&mut ckpt);
        let back = Checkpoint::from_json(&ckpt.to_json()).unwrap();
        let loaded = WorldModel::from_checkpoint(&back, 5, 3, 4, 6).unwrap();
        assert_eq!(loaded.fingerprint(), m.fingerprint());
        assert!(WorldModel::from_checkpoint(&back, 5, 3, 5, 6).is_err());
    }
}
