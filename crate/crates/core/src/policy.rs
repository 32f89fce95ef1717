//! The dialogue policy: Q-network, replay buffers, epsilon-greedy action
//! selection and minibatch Q-learning against a target network.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::collections::{BTreeMap, VecDeque};

use crate::domain::{ActionTemplate, DialogueAct, Intent, KnowledgeBase, Slot, NO_MATCH};
use crate::error::Result;
use crate::nn::{Activation, Gradients, LayerSpec, Mlp, OutputGrad};
use crate::tracker::DialogueState;

/// Q(s, .): one tanh hidden layer and a linear output per agent action.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    net: Mlp,
}

impl QNetwork {
    pub fn specs(state_dim: usize, hidden: usize, n_actions: usize) -> Vec<LayerSpec> {
        vec![
            LayerSpec::new(state_dim, hidden, Activation::Tanh),
            LayerSpec::new(hidden, n_actions, Activation::Linear),
        ]
    }

    pub fn new<R: Rng + ?Sized>(state_dim: usize, hidden: usize, n_actions: usize, rng: &mut R) -> Self {
        QNetwork {
            net: Mlp::new(&Self::specs(state_dim, hidden, n_actions), rng),
        }
    }

    pub fn from_mlp(net: Mlp) -> Self {
        assert_eq!(net.layers().len(), 2, "Q-network has exactly two layers");
        QNetwork { net }
    }

    pub fn mlp(&self) -> &Mlp {
        &self.net
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn n_actions(&self) -> usize {
        self.net.output_dim()
    }

    pub fn state_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn q_values(&self, state: &[f64]) -> Vec<f64> {
        self.net.predict(state)
    }

    /// Greedy action; ties go to the lowest id.
    pub fn greedy(&self, state: &[f64]) -> usize {
        argmax(&self.q_values(state))
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// With probability `epsilon` a uniformly random action, otherwise greedy.
pub fn select_action<R: Rng + ?Sized>(qnet: &QNetwork, state: &[f64], epsilon: f64, rng: &mut R) -> usize {
    assert!((0.0..=1.0).contains(&epsilon), "epsilon must lie in [0, 1]");
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..qnet.n_actions())
    } else {
        qnet.greedy(state)
    }
}

/// Which replay buffer an experience belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Real,
    Simulated,
}

/// One transition `(s, a, r, a_u, s')` plus the terminal flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub user_action: usize,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    pub origin: Origin,
}

/// Bounded FIFO replay memory with uniform sampling with replacement.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Experience>,
    capacity: usize,
    samples_drawn: Cell<u64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
            samples_drawn: Cell::new(0),
        }
    }

    pub fn push(&mut self, exp: Experience) {
        assert!(exp.reward.is_finite(), "experience reward must be finite");
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(exp);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }

    /// Number of minibatches drawn from this buffer so far.
    pub fn samples_drawn(&self) -> u64 {
        self.samples_drawn.get()
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Option<Vec<&Experience>> {
        if batch_size == 0 || self.items.len() < batch_size {
            return None;
        }
        self.samples_drawn.set(self.samples_drawn.get() + 1);
        Some(
            (0..batch_size)
                .map(|_| &self.items[rng.gen_range(0..self.items.len())])
                .collect(),
        )
    }
}

/// `y = r` for terminal transitions, else `r + gamma * max_a' Q'(s', a')`.
pub fn td_targets(target: &QNetwork, batch: &[&Experience], gamma: f64) -> Vec<f64> {
    assert!((0.0..=1.0).contains(&gamma), "gamma must lie in [0, 1]");
    batch
        .iter()
        .map(|e| {
            if e.terminal {
                e.reward
            } else {
                let next = target.q_values(&e.next_state);
                e.reward + gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect()
}

/// Mean squared TD error over the batch and its gradient with respect to the
/// Q-network parameters. Only the taken action's output receives gradient.
pub fn td_loss_and_gradient(
    qnet: &QNetwork,
    target: &QNetwork,
    batch: &[&Experience],
    gamma: f64,
) -> (f64, Gradients) {
    let targets = td_targets(target, batch, gamma);
    let n = batch.len() as f64;
    let mut grads = qnet.net.zero_gradients();
    let mut loss = 0.0;
    let mut out_grad = vec![0.0; qnet.n_actions()];
    for (e, y) in batch.iter().zip(&targets) {
        let acts = qnet.net.forward(&e.state);
        let residual = acts.output()[e.action] - y;
        loss += residual * residual;
        out_grad.iter_mut().for_each(|g| *g = 0.0);
        out_grad[e.action] = 2.0 * residual / n;
        qnet.net
            .backward_accumulate(&acts, OutputGrad::Output(&out_grad), &mut grads);
    }
    (loss / n, grads)
}

/// One SGD step on a uniformly sampled minibatch. Returns the pre-update loss,
/// or `None` when the buffer holds fewer than `batch_size` transitions.
pub fn q_learning_step<R: Rng + ?Sized>(
    qnet: &mut QNetwork,
    target: &QNetwork,
    buffer: &ReplayBuffer,
    batch_size: usize,
    gamma: f64,
    learning_rate: f64,
    rng: &mut R,
) -> Result<Option<f64>> {
    let Some(batch) = buffer.sample(batch_size, rng) else {
        return Ok(None);
    };
    let (loss, grads) = td_loss_and_gradient(qnet, target, &batch, gamma);
    qnet.net.sgd_step(&grads, learning_rate)?;
    Ok(Some(loss))
}

/// `theta_Q' <- theta_Q`.
pub fn sync_target(qnet: &QNetwork, target: &mut QNetwork) {
    target.net = qnet.net.clone();
}

/// What the agent currently believes: user constraints take precedence over
/// values the agent itself informed. Placeholder values are dropped.
fn known_constraints(state: &DialogueState) -> BTreeMap<Slot, String> {
    let mut known: BTreeMap<Slot, String> = state
        .agent_informed
        .iter()
        .filter(|(s, v)| **s != Slot::TaskComplete && v.as_str() != NO_MATCH)
        .map(|(s, v)| (*s, v.clone()))
        .collect();
    for (s, v) in &state.user_informed {
        known.insert(*s, v.clone());
    }
    known
}

/// Fills an agent action template with concrete values looked up in the
/// knowledge base.
///
/// `inform(taskcomplete)` books the first row compatible with everything known
/// and carries the row index as its value, plus the ticket count when the user
/// gave one.
pub fn realize_agent_act(template: &ActionTemplate, state: &DialogueState, kb: &KnowledgeBase) -> DialogueAct {
    match (template.intent, template.slot) {
        (Intent::Request, Some(slot)) => DialogueAct::request(slot),
        (Intent::Inform, Some(Slot::TaskComplete)) => {
            let known = known_constraints(state);
            let ticket = kb
                .first_match(&known)
                .map(|i| i.to_string())
                .unwrap_or_else(|| NO_MATCH.to_string());
            let mut act = DialogueAct::inform(Slot::TaskComplete, ticket);
            if let Some(n) = state.user_informed.get(&Slot::NumberOfPeople) {
                act = act.with_inform(Slot::NumberOfPeople, n.clone());
            }
            act
        }
        (Intent::Inform, Some(slot)) => {
            if let Some(v) = state.user_informed.get(&slot) {
                return DialogueAct::inform(slot, v.clone());
            }
            let mut known = known_constraints(state);
            known.remove(&slot);
            let value = kb
                .first_match(&known)
                .and_then(|i| kb.row(i))
                .and_then(|row| row.get(slot))
                .unwrap_or(NO_MATCH);
            DialogueAct::inform(slot, value)
        }
        (intent, _) => DialogueAct::new(intent),
    }
}
