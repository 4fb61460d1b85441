//! The four trainable variants and the alternating GAN training loop.
//!
//! Every variant shares the adversarial game. The generator objective adds
//! one auxiliary term:
//!
//! | variant  | auxiliary term                                  |
//! |----------|-------------------------------------------------|
//! | `gan`    | none                                            |
//! | `gan_d`  | `gamma1(t) * dpp_loss` with `gamma0 = 0`        |
//! | `gan_q`  | `gamma2 * (-mean quality)`                      |
//! | `padgan` | `gamma1(t) * dpp_loss` with the configured `gamma0` |
//!
//! where `gamma1(t) = gamma1_final * (t / T)^p`.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::datasets::SyntheticDataset;
use crate::dpp::{build_kernel, pad_loss_and_gradients, SimilarityKernel, DEFAULT_JITTER};
use crate::nn::{
    adam_step, sigmoid, softplus, DenseNetwork, Gradients, HiddenActivation, OptimizerState,
    OutputActivation,
};
use crate::quality::{realisticity_weighted_quality, Point, QualityFunction};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Gan,
    GanD,
    GanQ,
    Padgan,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Gan, Variant::GanD, Variant::GanQ, Variant::Padgan];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Gan => "gan",
            Variant::GanD => "gan_d",
            Variant::GanQ => "gan_q",
            Variant::Padgan => "padgan",
        }
    }

    fn uses_dpp(self) -> bool {
        matches!(self, Variant::GanD | Variant::Padgan)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gan" => Ok(Variant::Gan),
            "gan_d" | "gand" => Ok(Variant::GanD),
            "gan_q" | "ganq" => Ok(Variant::GanQ),
            "padgan" => Ok(Variant::Padgan),
            other => Err(Error::InvalidConfig(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub variant: Variant,
    /// Quality exponent of the batch kernel.
    pub gamma0: f64,
    /// Weight of the DPP loss at the end of training.
    pub gamma1_final: f64,
    /// Steepness `p` of the escalating DPP-loss weight.
    pub schedule_exponent: f64,
    /// Weight of the quality-only loss (`gan_q`).
    pub gamma2: f64,
    pub batch_size: usize,
    pub total_steps: usize,
    pub seed: u64,
    pub generator_lr: f64,
    pub discriminator_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Multiply quality by the discriminator output before using it.
    pub realisticity_weighting: bool,
    pub bandwidth: f64,
    pub jitter: f64,
    pub noise_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub leaky_slope: f64,
    /// Minimize `log(1 - D(G(z)))` literally instead of maximizing `log D(G(z))`.
    pub saturating_generator_loss: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            variant: Variant::Padgan,
            gamma0: 2.0,
            gamma1_final: 0.5,
            schedule_exponent: 2.0,
            gamma2: 10.0,
            batch_size: 32,
            total_steps: 10_000,
            seed: 0,
            generator_lr: 5e-4,
            discriminator_lr: 5e-4,
            beta1: 0.5,
            beta2: 0.999,
            realisticity_weighting: false,
            bandwidth: 1.0,
            jitter: DEFAULT_JITTER,
            noise_dim: 5,
            generator_hidden: vec![64, 64],
            discriminator_hidden: vec![64, 64],
            leaky_slope: 0.2,
            saturating_generator_loss: false,
        }
    }
}

impl TrainingConfig {
    pub fn for_variant(variant: Variant) -> Self {
        TrainingConfig {
            variant,
            ..Default::default()
        }
        .resolved()
    }

    /// Applies the variant's forced settings: `gan_d` has `gamma0 = 0`,
    /// `gan` has no DPP weight.
    pub fn resolved(mut self) -> Self {
        match self.variant {
            Variant::GanD => self.gamma0 = 0.0,
            Variant::Gan => self.gamma1_final = 0.0,
            _ => {}
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.gamma0 >= 0.0 && self.gamma1_final >= 0.0 && self.gamma2 >= 0.0) {
            return bad("gamma0, gamma1_final and gamma2 must be non-negative");
        }
        if !(self.schedule_exponent > 0.0) {
            return bad("schedule_exponent must be positive");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if self.variant == Variant::GanD && self.gamma0 != 0.0 {
            return bad("gan_d requires gamma0 = 0");
        }
        if self.variant == Variant::Gan && self.gamma1_final != 0.0 {
            return bad("gan requires gamma1_final = 0");
        }
        if !(self.generator_lr > 0.0 && self.discriminator_lr > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("moment decay rates must lie in [0, 1)");
        }
        if !(self.bandwidth > 0.0) || !(self.jitter >= 0.0) {
            return bad("bandwidth must be positive and jitter non-negative");
        }
        if self.noise_dim == 0 {
            return bad("noise_dim must be positive");
        }
        Ok(())
    }

    fn generator_layers(&self) -> Vec<usize> {
        let mut l = vec![self.noise_dim];
        l.extend(&self.generator_hidden);
        l.push(2);
        l
    }

    fn discriminator_layers(&self) -> Vec<usize> {
        let mut l = vec![2];
        l.extend(&self.discriminator_hidden);
        l.push(1);
        l
    }

    /// Weight of the auxiliary generator term at step `t`.
    pub fn auxiliary_weight(&self, t: usize) -> f64 {
        match self.variant {
            Variant::Gan => 0.0,
            Variant::GanQ => self.gamma2,
            Variant::GanD | Variant::Padgan => gamma1_schedule(
                t,
                self.total_steps,
                self.gamma1_final,
                self.schedule_exponent,
            ),
        }
    }
}

/// `gamma1_final * (t / T)^p`.
pub fn gamma1_schedule(t: usize, total: usize, gamma1_final: f64, exponent: f64) -> f64 {
    debug_assert!(t <= total, "step {t} beyond schedule length {total}");
    if t >= total {
        return gamma1_final;
    }
    gamma1_final * (t as f64 / total as f64).powf(exponent)
}

/// `-mean(log D(x)) - mean(log(1 - D(G(z))))` on probabilities.
pub fn discriminator_loss(d_real: &[f64], d_fake: &[f64]) -> f64 {
    let mean =
        |v: &[f64], f: &dyn Fn(f64) -> f64| v.iter().map(|&p| f(p)).sum::<f64>() / v.len() as f64;
    -mean(d_real, &|p| p.ln()) - mean(d_fake, &|p| (-p).ln_1p())
}

/// Non-saturating generator loss `-mean(log D(G(z)))`.
pub fn generator_adversarial_loss(d_fake: &[f64]) -> f64 {
    -d_fake.iter().map(|p| p.ln()).sum::<f64>() / d_fake.len() as f64
}

/// `-mean(q)`.
pub fn quality_only_loss(qualities: &[f64]) -> f64 {
    -qualities.iter().sum::<f64>() / qualities.len() as f64
}

/// Per-step record of the training curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub step: usize,
    pub d_loss: f64,
    pub g_adv_loss: f64,
    /// Weighted auxiliary loss (`weight * term`), zero when the term is off.
    pub aux_loss: f64,
    /// Weight applied to the auxiliary term at this step.
    pub gamma1: f64,
}

/// Networks and optimizer states of a run in progress.
#[derive(Debug, Clone, PartialEq)]
pub struct GanState {
    pub generator: DenseNetwork,
    pub discriminator: DenseNetwork,
    pub generator_opt: OptimizerState,
    pub discriminator_opt: OptimizerState,
    pub step: usize,
}

const GENERATOR_SEED_SALT: u64 = 0x6A09_E667_F3BC_C908;
const DISCRIMINATOR_SEED_SALT: u64 = 0xBB67_AE85_84CA_A73B;
const TRAINING_SEED_SALT: u64 = 0x3C6E_F372_FE94_F82B;

impl GanState {
    pub fn new(config: &TrainingConfig) -> Result<Self> {
        config.validate()?;
        let act = HiddenActivation::LeakyRelu(config.leaky_slope);
        let generator = DenseNetwork::init(
            &config.generator_layers(),
            act,
            OutputActivation::Identity,
            config.seed ^ GENERATOR_SEED_SALT,
        )?;
        let discriminator = DenseNetwork::init(
            &config.discriminator_layers(),
            act,
            OutputActivation::Sigmoid,
            config.seed ^ DISCRIMINATOR_SEED_SALT,
        )?;
        Ok(GanState {
            generator_opt: OptimizerState::new(
                &generator,
                config.generator_lr,
                config.beta1,
                config.beta2,
            ),
            discriminator_opt: OptimizerState::new(
                &discriminator,
                config.discriminator_lr,
                config.beta1,
                config.beta2,
            ),
            generator,
            discriminator,
            step: 0,
        })
    }
}

/// Standard-normal noise of shape `n × dim`.
pub fn sample_noise<R: rand::Rng + ?Sized>(rng: &mut R, n: usize, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, dim, |_, _| StandardNormal.sample(rng))
}

pub fn rows_to_points(m: &DMatrix<f64>) -> Vec<Point> {
    (0..m.nrows()).map(|r| [m[(r, 0)], m[(r, 1)]]).collect()
}

pub fn points_to_rows(points: &[Point]) -> DMatrix<f64> {
    DMatrix::from_fn(points.len(), 2, |r, c| points[r][c])
}

/// One discriminator update on a real batch and a generated batch.
/// Returns the discriminator loss before the update.
pub fn discriminator_step(
    state: &mut GanState,
    real: &DMatrix<f64>,
    noise: &DMatrix<f64>,
) -> Result<f64> {
    let fake = state.generator.predict(noise)?;
    let (n_real, n_fake) = (real.nrows(), fake.nrows());
    let mut stacked = DMatrix::zeros(n_real + n_fake, 2);
    stacked.rows_mut(0, n_real).copy_from(real);
    stacked.rows_mut(n_real, n_fake).copy_from(&fake);

    let (_, tape) = state.discriminator.forward(&stacked)?;
    let logits = tape.output_pre_activation();
    let mut seed = DMatrix::zeros(n_real + n_fake, 1);
    let mut loss = 0.0;
    for r in 0..n_real {
        let l = logits[(r, 0)];
        // -log sigmoid(l) = softplus(-l)
        loss += softplus(-l) / n_real as f64;
        seed[(r, 0)] = (sigmoid(l) - 1.0) / n_real as f64;
    }
    for r in n_real..n_real + n_fake {
        let l = logits[(r, 0)];
        // -log(1 - sigmoid(l)) = softplus(l)
        loss += softplus(l) / n_fake as f64;
        seed[(r, 0)] = sigmoid(l) / n_fake as f64;
    }
    let (grads, _) = state
        .discriminator
        .backward_from_pre_activation(&tape, &seed)?;
    adam_step(
        &mut state.discriminator,
        &mut state.discriminator_opt,
        &grads,
    )?;
    Ok(loss)
}

/// Gradients of the generator objective with respect to the generated
/// designs, split into the adversarial and auxiliary parts.
pub struct OutputGradients {
    pub generated: DMatrix<f64>,
    pub generator_tape: crate::nn::Tape,
    pub adversarial: DMatrix<f64>,
    /// Unweighted gradient of the auxiliary term, absent when its weight is 0.
    pub auxiliary: Option<DMatrix<f64>>,
    pub aux_weight: f64,
    pub adv_loss: f64,
    /// Unweighted auxiliary loss (0 when absent).
    pub aux_loss: f64,
}

impl OutputGradients {
    pub fn combined(&self) -> DMatrix<f64> {
        match &self.auxiliary {
            Some(aux) => &self.adversarial + aux * self.aux_weight,
            None => self.adversarial.clone(),
        }
    }
}

/// Forward pass of the generator step up to the generated designs.
pub fn generator_output_gradients<Q: QualityFunction + ?Sized>(
    state: &GanState,
    config: &TrainingConfig,
    quality: &Q,
    noise: &DMatrix<f64>,
    t: usize,
) -> Result<OutputGradients> {
    let (generated, generator_tape) = state.generator.forward(noise)?;
    let n = generated.nrows();
    let (_, d_tape) = state.discriminator.forward(&generated)?;
    let logits = d_tape.output_pre_activation().clone();

    let mut logit_seed = DMatrix::zeros(n, 1);
    let mut adv_loss = 0.0;
    for r in 0..n {
        let l = logits[(r, 0)];
        if config.saturating_generator_loss {
            // minimize log(1 - sigmoid(l)) = -softplus(l)
            adv_loss -= softplus(l) / n as f64;
            logit_seed[(r, 0)] = -sigmoid(l) / n as f64;
        } else {
            adv_loss += softplus(-l) / n as f64;
            logit_seed[(r, 0)] = (sigmoid(l) - 1.0) / n as f64;
        }
    }
    let adversarial = state
        .discriminator
        .input_gradients_from_pre_activation(&d_tape, &logit_seed)?;

    let aux_weight = config.auxiliary_weight(t);
    let mut aux_loss = 0.0;
    let auxiliary = if aux_weight > 0.0 {
        let points = rows_to_points(&generated);
        let mut qualities: Vec<f64> = points.iter().map(|x| quality.evaluate(x)).collect();
        let mut quality_grads: Vec<Point> = points.iter().map(|x| quality.gradient(x)).collect();
        if config.realisticity_weighting {
            // q = D(x) q'(x)  =>  dq/dx = q' dD/dx + D dq'/dx
            let d_seed = logits.map(|l| {
                let s = sigmoid(l);
                s * (1.0 - s)
            });
            let d_grad = state
                .discriminator
                .input_gradients_from_pre_activation(&d_tape, &d_seed)?;
            for r in 0..n {
                let d = sigmoid(logits[(r, 0)]).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                let q_raw = qualities[r];
                quality_grads[r] = [
                    q_raw * d_grad[(r, 0)] + d * quality_grads[r][0],
                    q_raw * d_grad[(r, 1)] + d * quality_grads[r][1],
                ];
                qualities[r] = realisticity_weighted_quality(d, q_raw);
            }
        }
        let mut grad = DMatrix::zeros(n, 2);
        if config.variant.uses_dpp() {
            let similarity = SimilarityKernel::rbf(config.bandwidth)?;
            let kernel = build_kernel(
                &points,
                &qualities,
                config.gamma0,
                &similarity,
                config.jitter,
            )?;
            let (loss, grads) =
                pad_loss_and_gradients(&kernel, &points, &qualities, &quality_grads, &similarity)?;
            aux_loss = loss;
            for (r, g) in grads.iter().enumerate() {
                grad[(r, 0)] = g[0];
                grad[(r, 1)] = g[1];
            }
        } else {
            aux_loss = quality_only_loss(&qualities);
            for (r, g) in quality_grads.iter().enumerate() {
                grad[(r, 0)] = -g[0] / n as f64;
                grad[(r, 1)] = -g[1] / n as f64;
            }
        }
        Some(grad)
    } else {
        None
    };

    Ok(OutputGradients {
        generated,
        generator_tape,
        adversarial,
        auxiliary,
        aux_weight,
        adv_loss,
        aux_loss,
    })
}

/// Pre-optimizer generator parameter gradients, total and per term.
pub struct GeneratorGradients {
    pub combined: Gradients,
    pub adversarial: Gradients,
    pub auxiliary: Option<Gradients>,
    pub aux_weight: f64,
}

/// Backpropagates each generator term separately as well as their weighted sum.
pub fn generator_gradients<Q: QualityFunction + ?Sized>(
    state: &GanState,
    config: &TrainingConfig,
    quality: &Q,
    noise: &DMatrix<f64>,
    t: usize,
) -> Result<GeneratorGradients> {
    let out = generator_output_gradients(state, config, quality, noise, t)?;
    let backward = |seed: &DMatrix<f64>| {
        state
            .generator
            .backward(&out.generator_tape, seed)
            .map(|(g, _)| g)
    };
    Ok(GeneratorGradients {
        combined: backward(&out.combined())?,
        adversarial: backward(&out.adversarial)?,
        auxiliary: out.auxiliary.as_ref().map(backward).transpose()?,
        aux_weight: out.aux_weight,
    })
}

/// One discriminator update followed by one generator update.
///
/// A kernel factorization failure in the generator update is retried once
/// with fresh noise before the error is returned.
pub fn train_step<Q: QualityFunction + ?Sized, R: rand::Rng + ?Sized>(
    state: &mut GanState,
    config: &TrainingConfig,
    real: &DMatrix<f64>,
    quality: &Q,
    rng: &mut R,
) -> Result<StepLosses> {
    if real.nrows() != config.batch_size || real.ncols() != 2 {
        return Err(Error::Dimension(format!(
            "data batch is {}x{}, expected {}x2",
            real.nrows(),
            real.ncols(),
            config.batch_size
        )));
    }
    let t = state.step;
    let d_noise = sample_noise(rng, config.batch_size, config.noise_dim);
    let d_loss = discriminator_step(state, real, &d_noise)?;

    let mut attempt = 0;
    let out = loop {
        let g_noise = sample_noise(rng, config.batch_size, config.noise_dim);
        match generator_output_gradients(state, config, quality, &g_noise, t) {
            Ok(out) => break out,
            Err(Error::NotPositiveDefinite { size }) if attempt == 0 => {
                warn!("step {t}: batch kernel of size {size} not positive definite, retrying with fresh noise");
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    };
    let (grads, _) = state
        .generator
        .backward(&out.generator_tape, &out.combined())?;
    adam_step(&mut state.generator, &mut state.generator_opt, &grads)?;
    state.step += 1;

    Ok(StepLosses {
        step: t,
        d_loss,
        g_adv_loss: out.adv_loss,
        aux_loss: out.aux_weight * out.aux_loss,
        gamma1: out.aux_weight,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub generator: DenseNetwork,
    pub discriminator: DenseNetwork,
    pub history: Vec<StepLosses>,
}

impl TrainedModel {
    /// Draws `n` designs from the generator.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Point>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = sample_noise(&mut rng, n, self.generator.input_dim());
        let out = self.generator.predict(&noise)?;
        let points = rows_to_points(&out);
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("generated samples"));
        }
        Ok(points)
    }

    /// Discriminator probabilities for a set of designs.
    pub fn discriminate(&self, points: &[Point]) -> Result<Vec<f64>> {
        let out = self.discriminator.predict(&points_to_rows(points))?;
        Ok(out.iter().copied().collect())
    }
}

/// Runs `total_steps` alternating updates on shuffled minibatches.
pub fn train<Q: QualityFunction + ?Sized>(
    config: &TrainingConfig,
    dataset: &SyntheticDataset,
    quality: &Q,
) -> Result<TrainedModel> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let mut state = GanState::new(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ TRAINING_SEED_SALT);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut cursor = order.len();
    let mut history = Vec::with_capacity(config.total_steps);
    let mut batch = DMatrix::zeros(config.batch_size, 2);

    for _ in 0..config.total_steps {
        for r in 0..config.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let p = dataset.points[order[cursor]];
            cursor += 1;
            batch[(r, 0)] = p[0];
            batch[(r, 1)] = p[1];
        }
        history.push(train_step(&mut state, config, &batch, quality, &mut rng)?);
    }
    Ok(TrainedModel {
        generator: state.generator,
        discriminator: state.discriminator,
        history,
    })
}
