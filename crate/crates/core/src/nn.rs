//! Dense feed-forward networks with explicit backpropagation.
//!
//! A network is a stack of affine layers. Every layer except the last applies
//! the hidden activation; the last applies the output activation:
//!
//! - `z_l = a_{l-1} W_l + b_l`
//! - `a_l = act(z_l)`
//!
//! Inputs are row-major batches (`batch × in_dim`), so weights are stored as
//! `fan_in × fan_out` matrices and biases as row vectors.

use nalgebra::{DMatrix, RowDVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    Relu,
    LeakyRelu(f64),
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    Sigmoid,
}

impl HiddenActivation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            HiddenActivation::Relu => z.max(0.0),
            HiddenActivation::LeakyRelu(slope) => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            HiddenActivation::Tanh => z.tanh(),
        }
    }

    /// Derivative with respect to the pre-activation `z`.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            HiddenActivation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            HiddenActivation::LeakyRelu(slope) => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            HiddenActivation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    /// Variance of the fan-in scaled initialization for this activation.
    fn init_variance(self, fan_in: usize) -> f64 {
        match self {
            HiddenActivation::Relu | HiddenActivation::LeakyRelu(_) => 2.0 / fan_in as f64,
            HiddenActivation::Tanh => 1.0 / fan_in as f64,
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl OutputActivation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            OutputActivation::Identity => z,
            OutputActivation::Sigmoid => sigmoid(z),
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            OutputActivation::Identity => 1.0,
            OutputActivation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

/// Per-layer parameter gradients, shaped like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<RowDVector<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Gradients {
            weights: net
                .weights
                .iter()
                .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
                .collect(),
            biases: net
                .biases
                .iter()
                .map(|b| RowDVector::zeros(b.len()))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b * scale;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b * scale;
        }
    }

    /// All entries in layer order, weights before biases within a layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

/// Cached intermediate values of a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `activations[0]` is the input batch; `activations[l]` feeds layer `l`.
    activations: Vec<DMatrix<f64>>,
    pre_activations: Vec<DMatrix<f64>>,
}

impl Tape {
    pub fn batch_size(&self) -> usize {
        self.activations[0].nrows()
    }

    /// Pre-activation of the output layer (the logits for a sigmoid head).
    pub fn output_pre_activation(&self) -> &DMatrix<f64> {
        self.pre_activations
            .last()
            .expect("tape has at least one layer")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layer_sizes: Vec<usize>,
    weights: Vec<DMatrix<f64>>,
    biases: Vec<RowDVector<f64>>,
    hidden_activation: HiddenActivation,
    output_activation: OutputActivation,
}

impl DenseNetwork {
    /// Draws weights from `N(0, var(fan_in))` and zeroes the biases.
    pub fn init(
        layer_sizes: &[usize],
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
        seed: u64,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "a network needs at least two layer sizes, got {}",
                layer_sizes.len()
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig("layer sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let std = hidden_activation.init_variance(fan_in).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            weights.push(DMatrix::from_fn(fan_in, fan_out, |_, _| {
                normal.sample(&mut rng)
            }));
            biases.push(RowDVector::zeros(fan_out));
        }
        Ok(DenseNetwork {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            hidden_activation,
            output_activation,
        })
    }

    /// Builds a network from explicit parameters.
    pub fn from_parameters(
        weights: Vec<DMatrix<f64>>,
        biases: Vec<RowDVector<f64>>,
        hidden_activation: HiddenActivation,
        output_activation: OutputActivation,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Dimension(format!(
                "{} weight matrices vs {} bias vectors",
                weights.len(),
                biases.len()
            )));
        }
        let mut layer_sizes = vec![weights[0].nrows()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.nrows() != *layer_sizes.last().unwrap() || w.ncols() != b.len() {
                return Err(Error::Dimension(format!(
                    "layer {l}: weight {}x{} does not chain with previous size {} / bias {}",
                    w.nrows(),
                    w.ncols(),
                    layer_sizes.last().unwrap(),
                    b.len()
                )));
            }
            layer_sizes.push(w.ncols());
        }
        let net = DenseNetwork {
            layer_sizes,
            weights,
            biases,
            hidden_activation,
            output_activation,
        };
        if !net.parameters_finite() {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[RowDVector<f64>] {
        &self.biases
    }

    pub fn hidden_activation(&self) -> HiddenActivation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output_activation
    }

    pub fn num_parameters(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    /// Parameters in the same order as [`Gradients::flatten`].
    pub fn flatten_parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    /// Overwrites parameters from a flat slice in [`Self::flatten_parameters`] order.
    pub fn set_flat_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_parameters() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.num_parameters(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.len();
            w.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
            let n = b.len();
            b.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn parameters_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    fn check_input(&self, inputs: &DMatrix<f64>) -> Result<()> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input has {} columns, network expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        if !inputs.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("network inputs"));
        }
        Ok(())
    }

    fn affine(&self, layer: usize, input: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = input * &self.weights[layer];
        for (mut col, b) in z.column_iter_mut().zip(self.biases[layer].iter()) {
            col.add_scalar_mut(*b);
        }
        z
    }

    fn activate(&self, layer: usize, z: &DMatrix<f64>) -> DMatrix<f64> {
        if layer + 1 == self.weights.len() {
            let act = self.output_activation;
            z.map(|v| act.apply(v))
        } else {
            let act = self.hidden_activation;
            z.map(|v| act.apply(v))
        }
    }

    /// Forward pass without recording a tape.
    pub fn predict(&self, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_input(inputs)?;
        let mut a = inputs.clone();
        for layer in 0..self.weights.len() {
            let z = self.affine(layer, &a);
            a = self.activate(layer, &z);
        }
        Ok(a)
    }

    /// Forward pass that records everything [`Self::backward`] needs.
    pub fn forward(&self, inputs: &DMatrix<f64>) -> Result<(DMatrix<f64>, Tape)> {
        self.check_input(inputs)?;
        let depth = self.weights.len();
        let mut activations = Vec::with_capacity(depth + 1);
        let mut pre_activations = Vec::with_capacity(depth);
        activations.push(inputs.clone());
        for layer in 0..depth {
            let z = self.affine(layer, &activations[layer]);
            let a = self.activate(layer, &z);
            pre_activations.push(z);
            activations.push(a);
        }
        let output = activations.pop().unwrap();
        Ok((
            output,
            Tape {
                activations,
                pre_activations,
            },
        ))
    }

    fn check_seed(&self, tape: &Tape, seed: &DMatrix<f64>) -> Result<()> {
        if tape.pre_activations.len() != self.weights.len()
            || tape.activations[0].ncols() != self.input_dim()
        {
            return Err(Error::Dimension("tape does not match network".into()));
        }
        if seed.nrows() != tape.batch_size() || seed.ncols() != self.output_dim() {
            return Err(Error::Dimension(format!(
                "output gradient is {}x{}, expected {}x{}",
                seed.nrows(),
                seed.ncols(),
                tape.batch_size(),
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// Backpropagates gradients of a scalar loss with respect to the outputs.
    ///
    /// Returns parameter gradients and the gradient with respect to every
    /// input entry.
    pub fn backward(
        &self,
        tape: &Tape,
        output_gradients: &DMatrix<f64>,
    ) -> Result<(Gradients, DMatrix<f64>)> {
        self.check_seed(tape, output_gradients)?;
        let act = self.output_activation;
        let delta =
            output_gradients.zip_map(tape.output_pre_activation(), |g, z| g * act.derivative(z));
        let (grads, input_grads) = self.backprop(tape, delta, true);
        Ok((grads.unwrap(), input_grads))
    }

    /// Like [`Self::backward`] but seeded with gradients of the output
    /// pre-activation, skipping the output nonlinearity. Used for sigmoid
    /// heads whose loss is written in terms of logits.
    pub fn backward_from_pre_activation(
        &self,
        tape: &Tape,
        pre_activation_gradients: &DMatrix<f64>,
    ) -> Result<(Gradients, DMatrix<f64>)> {
        self.check_seed(tape, pre_activation_gradients)?;
        let (grads, input_grads) = self.backprop(tape, pre_activation_gradients.clone(), true);
        Ok((grads.unwrap(), input_grads))
    }

    /// Input gradients only, seeded at the output pre-activation.
    pub fn input_gradients_from_pre_activation(
        &self,
        tape: &Tape,
        pre_activation_gradients: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        self.check_seed(tape, pre_activation_gradients)?;
        Ok(self
            .backprop(tape, pre_activation_gradients.clone(), false)
            .1)
    }

    fn backprop(
        &self,
        tape: &Tape,
        mut delta: DMatrix<f64>,
        want_params: bool,
    ) -> (Option<Gradients>, DMatrix<f64>) {
        let depth = self.weights.len();
        let mut dw = Vec::with_capacity(depth);
        let mut db = Vec::with_capacity(depth);
        for layer in (0..depth).rev() {
            if want_params {
                dw.push(tape.activations[layer].tr_mul(&delta));
                db.push(delta.row_sum());
            }
            let upstream = &delta * self.weights[layer].transpose();
            if layer == 0 {
                delta = upstream;
                break;
            }
            let act = self.hidden_activation;
            delta = upstream.zip_map(&tape.pre_activations[layer - 1], |g, z| {
                g * act.derivative(z)
            });
        }
        let grads = want_params.then(|| {
            dw.reverse();
            db.reverse();
            Gradients {
                weights: dw,
                biases: db,
            }
        });
        (grads, delta)
    }
}

/// Adaptive-moment optimizer state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    m: Gradients,
    v: Gradients,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(net: &DenseNetwork, learning_rate: f64, beta1: f64, beta2: f64) -> Self {
        OptimizerState {
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
            step: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon: 1e-8,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Gradients {
        &self.m
    }

    pub fn second_moment(&self) -> &Gradients {
        &self.v
    }
}

/// One bias-corrected adaptive-moment update.
///
/// Nothing is modified unless the gradients are finite, correctly shaped and
/// the resulting parameters are finite.
pub fn adam_step(
    net: &mut DenseNetwork,
    state: &mut OptimizerState,
    grads: &Gradients,
) -> Result<()> {
    let shapes_match = grads.weights.len() == net.weights.len()
        && grads.biases.len() == net.biases.len()
        && grads
            .weights
            .iter()
            .zip(&net.weights)
            .all(|(g, w)| g.shape() == w.shape())
        && grads
            .biases
            .iter()
            .zip(&net.biases)
            .all(|(g, b)| g.len() == b.len());
    if !shapes_match || state.m.weights.len() != net.weights.len() {
        return Err(Error::Dimension(
            "gradients or optimizer state do not match network".into(),
        ));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradients"));
    }

    let step = state.step + 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let bias1 = 1.0 - b1.powi(step as i32);
    let bias2 = 1.0 - b2.powi(step as i32);
    let (lr, eps) = (state.learning_rate, state.epsilon);

    let mut new_net = net.clone();
    let mut m = state.m.clone();
    let mut v = state.v.clone();

    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };
    for l in 0..new_net.weights.len() {
        update(
            new_net.weights[l].as_mut_slice(),
            grads.weights[l].as_slice(),
            m.weights[l].as_mut_slice(),
            v.weights[l].as_mut_slice(),
        );
        update(
            new_net.biases[l].as_mut_slice(),
            grads.biases[l].as_slice(),
            m.biases[l].as_mut_slice(),
            v.biases[l].as_mut_slice(),
        );
    }
    if !new_net.parameters_finite() || !m.is_finite() || !v.is_finite() {
        return Err(Error::NonFinite("updated parameters"));
    }
    *net = new_net;
    state.m = m;
    state.v = v;
    state.step = step;
    Ok(())
}
