//! Small feed-forward network engine: dense layers, analytic backpropagation
//! and plain SGD, all in `f64`.
//!
//! Shape mismatches between a network and its inputs are programmer errors and
//! panic. Non-finite gradients are reported as [`Error::NonFinite`] by
//! [`Mlp::sgd_step`], which leaves the parameters untouched in that case.

mod checkpoint;
mod optim;

pub use checkpoint::Checkpoint;
pub use optim::{Optimizer, OptimizerKind};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Linear,
    Softmax,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        assert!(input_dim >= 1 && output_dim >= 1, "layer dims must be >= 1");
        LayerSpec {
            input_dim,
            output_dim,
            activation,
        }
    }
}

/// Fully connected layer; `weights` is row-major `output_dim x input_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub spec: LayerSpec,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(spec: LayerSpec) -> Self {
        Dense {
            spec,
            weights: vec![0.0; spec.input_dim * spec.output_dim],
            bias: vec![0.0; spec.output_dim],
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, zero bias.
    fn init<R: Rng + ?Sized>(spec: LayerSpec, rng: &mut R) -> Self {
        let bound = 1.0 / (spec.input_dim as f64).sqrt();
        let mut layer = Dense::zeros(spec);
        for w in &mut layer.weights {
            *w = rng.gen_range(-bound..=bound);
        }
        layer
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        let n_in = self.spec.input_dim;
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(o, b)| {
            let row = &self.weights[o * n_in..(o + 1) * n_in];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
        activate(self.spec.activation, out);
    }

    fn shape_consistent(&self) -> bool {
        self.weights.len() == self.spec.input_dim * self.spec.output_dim
            && self.bias.len() == self.spec.output_dim
    }
}

fn activate(activation: Activation, z: &mut [f64]) {
    match activation {
        Activation::Linear => {}
        Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
        Activation::Sigmoid => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
        Activation::Softmax => softmax_in_place(z),
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Inputs and post-activation outputs of every layer from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub input: Vec<f64>,
    pub outputs: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().map(Vec::as_slice).unwrap_or(&self.input)
    }

    fn layer_input(&self, layer: usize) -> &[f64] {
        if layer == 0 {
            &self.input
        } else {
            &self.outputs[layer - 1]
        }
    }
}

/// Where the output gradient handed to backpropagation is taken.
#[derive(Debug, Clone, Copy)]
pub enum OutputGrad<'a> {
    /// d loss / d (post-activation output).
    Output(&'a [f64]),
    /// d loss / d (pre-activation logits) of the last layer; used for fused
    /// softmax + cross-entropy and sigmoid + binary cross-entropy.
    Logits(&'a [f64]),
}

/// Gradient of a loss with respect to every parameter of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn is_zero(&self) -> bool {
        self.iter().all(|g| g == 0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }

    /// Flattened in the same order as [`Mlp::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        self.iter().collect()
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rescales so the L2 norm is at most `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let norm = self.norm();
        if norm > max_norm {
            self.scale(max_norm / norm);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()).flatten() {
            *v *= factor;
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }
}

/// A multilayer perceptron; its layers are the network parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(specs: &[LayerSpec], rng: &mut R) -> Self {
        check_chain(specs);
        Mlp {
            layers: specs.iter().map(|&s| Dense::init(s, rng)).collect(),
        }
    }

    pub fn zeros(specs: &[LayerSpec]) -> Self {
        check_chain(specs);
        Mlp {
            layers: specs.iter().map(|&s| Dense::zeros(s)).collect(),
        }
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec).collect();
        let chained = specs.windows(2).all(|w| w[0].output_dim == w[1].input_dim);
        if layers.is_empty() || !chained || !layers.iter().all(Dense::shape_consistent) {
            return Err(Error::Format("inconsistent layer shapes".into()));
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").spec.output_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Forward pass keeping every intermediate activation.
    pub fn forward(&self, input: &[f64]) -> Activations {
        assert_eq!(
            input.len(),
            self.input_dim(),
            "input length {} does not match network input dim {}",
            input.len(),
            self.input_dim()
        );
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.spec.output_dim);
            let x = if i == 0 { input } else { &outputs[i - 1] };
            layer.forward(x, &mut out);
            outputs.push(out);
        }
        Activations {
            input: input.to_vec(),
            outputs,
        }
    }

    /// Output of the last layer only.
    pub fn predict(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.input_dim(), "input dimension mismatch");
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward(&current, &mut next);
            std::mem::swap(&mut current, &mut next);
        }
        current
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    /// Gradient of a loss whose derivative with respect to the network output
    /// is `grad_output`.
    pub fn backward(&self, activations: &Activations, grad_output: &[f64]) -> Gradients {
        let mut grads = self.zero_gradients();
        self.backward_accumulate(activations, OutputGrad::Output(grad_output), &mut grads);
        grads
    }

    /// Adds this sample's parameter gradient into `grads` and returns the
    /// gradient with respect to the network input.
    pub fn backward_accumulate(
        &self,
        activations: &Activations,
        grad: OutputGrad<'_>,
        grads: &mut Gradients,
    ) -> Vec<f64> {
        assert_eq!(activations.outputs.len(), self.layers.len(), "activations from another network");
        assert_eq!(grads.weights.len(), self.layers.len(), "gradient set from another network");
        let last = self.layers.len() - 1;
        let mut delta = match grad {
            OutputGrad::Output(g) => {
                assert_eq!(g.len(), self.output_dim(), "output gradient length mismatch");
                activation_backward(self.layers[last].spec.activation, &activations.outputs[last], g)
            }
            OutputGrad::Logits(g) => {
                assert_eq!(g.len(), self.output_dim(), "logit gradient length mismatch");
                g.to_vec()
            }
        };
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let n_in = layer.spec.input_dim;
            let x = activations.layer_input(l);
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            let mut grad_input = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                gb[o] += d;
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * n_in..(o + 1) * n_in];
                let grow = &mut gw[o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    grow[i] += d * x[i];
                    grad_input[i] += row[i] * d;
                }
            }
            if l == 0 {
                return grad_input;
            }
            delta = activation_backward(self.layers[l - 1].spec.activation, &activations.outputs[l - 1], &grad_input);
        }
        unreachable!("loop returns at layer 0")
    }

    /// `theta <- theta - lr * grad`. Rejects non-finite gradients without
    /// touching the parameters.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        assert!(learning_rate > 0.0, "learning rate must be positive");
        assert_eq!(grads.weights.len(), self.layers.len(), "gradient shape mismatch");
        if !grads.all_finite() {
            return Err(Error::NonFinite("gradient".into()));
        }
        for (l, layer) in self.layers.iter_mut().enumerate() {
            assert_eq!(grads.weights[l].len(), layer.weights.len(), "gradient shape mismatch");
            for (w, g) in layer.weights.iter_mut().zip(&grads.weights[l]) {
                *w -= learning_rate * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(&grads.biases[l]) {
                *b -= learning_rate * g;
            }
        }
        if !self.all_finite() {
            return Err(Error::NonFinite("parameters after update".into()));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.flat_iter().all(f64::is_finite)
    }

    fn flat_iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn flat_params(&self) -> Vec<f64> {
        self.flat_iter().collect()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.num_params(), "parameter count mismatch");
        let mut it = values.iter().copied();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = it.next().unwrap();
            }
        }
    }

    /// SHA-256 over the parameter bit patterns; equal iff parameters are
    /// bit-identical (up to hash collisions).
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for layer in &self.layers {
            hasher.update((layer.spec.input_dim as u64).to_le_bytes());
            hasher.update((layer.spec.output_dim as u64).to_le_bytes());
        }
        for v in self.flat_iter() {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

fn check_chain(specs: &[LayerSpec]) {
    assert!(!specs.is_empty(), "network needs at least one layer");
    for w in specs.windows(2) {
        assert_eq!(w[0].output_dim, w[1].input_dim, "layer dims do not chain");
    }
}

/// Maps d loss / d output to d loss / d pre-activation, given the output `y`.
fn activation_backward(activation: Activation, y: &[f64], grad: &[f64]) -> Vec<f64> {
    match activation {
        Activation::Linear => grad.to_vec(),
        Activation::Tanh => y.iter().zip(grad).map(|(y, g)| g * (1.0 - y * y)).collect(),
        Activation::Sigmoid => y.iter().zip(grad).map(|(y, g)| g * y * (1.0 - y)).collect(),
        Activation::Softmax => {
            let dot: f64 = y.iter().zip(grad).map(|(y, g)| y * g).sum();
            y.iter().zip(grad).map(|(y, g)| y * (g - dot)).collect()
        }
    }
}
