use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// `θ ← θ − lr·g`.
    #[default]
    Sgd,
    /// Gradient scaled by a running RMS (decay 0.99).
    RmsProp,
    /// Bias-corrected first and second moments (β = 0.9, 0.999).
    Adam,
}

const RMS_DECAY: f64 = 0.99;
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Per-network optimizer state. Each update is applied through
/// [`Mlp::sgd_step`] with the optimizer's step direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    first: Option<Gradients>,
    second: Option<Gradients>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Optimizer {
            kind,
            first: None,
            second: None,
            steps: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Forgets all accumulated moments.
    pub fn reset(&mut self) {
        *self = Optimizer::new(self.kind);
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients, learning_rate: f64) -> Result<()> {
        if !grads.all_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => net.sgd_step(grads, learning_rate),
            OptimizerKind::RmsProp => {
                let v = self.second.get_or_insert_with(|| net.zero_gradients());
                let mut dir = grads.clone();
                let rows = v
                    .weights
                    .iter_mut()
                    .chain(v.biases.iter_mut())
                    .zip(dir.weights.iter_mut().chain(dir.biases.iter_mut()))
                    .zip(grads.weights.iter().chain(&grads.biases));
                for ((vr, dr), gr) in rows {
                    for ((v, d), g) in vr.iter_mut().zip(dr.iter_mut()).zip(gr) {
                        *v = RMS_DECAY * *v + (1.0 - RMS_DECAY) * g * g;
                        *d = g / (v.sqrt() + EPS);
                    }
                }
                net.sgd_step(&dir, learning_rate)
            }
            OptimizerKind::Adam => {
                let m = self.first.get_or_insert_with(|| net.zero_gradients());
                let v = self.second.get_or_insert_with(|| net.zero_gradients());
                let c1 = 1.0 - BETA1.powi(self.steps as i32);
                let c2 = 1.0 - BETA2.powi(self.steps as i32);
                let mut dir = grads.clone();
                let rows = m
                    .weights
                    .iter_mut()
                    .chain(m.biases.iter_mut())
                    .zip(v.weights.iter_mut().chain(v.biases.iter_mut()))
                    .zip(dir.weights.iter_mut().chain(dir.biases.iter_mut()))
                    .zip(grads.weights.iter().chain(&grads.biases));
                for (((mr, vr), dr), gr) in rows {
                    for (((m, v), d), g) in mr.iter_mut().zip(vr.iter_mut()).zip(dr.iter_mut()).zip(gr) {
                        *m = BETA1 * *m + (1.0 - BETA1) * g;
                        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                        *d = (*m / c1) / ((*v / c2).sqrt() + EPS);
                    }
                }
                net.sgd_step(&dir, learning_rate)
            }
        }
    }
}
