//! Minibatch first-order training of scorer models on a surrogate loss, and
//! evaluation of a trained model as a deferral system.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{asym_softmax_multi, estimate_ova, sova_clipped, ssm_clipped};
use crate::estimators::{ProbEstimate, ScoreVector};
use crate::model::{ScorerModel, Trace};
use crate::oracle::{decide, deferral_loss, Decision};
use crate::surrogates::{batch_loss_and_grad, loss, LossKind};
use crate::synthetic::LabeledSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Plain SGD with a cosine-annealed step size over all batch steps.
    SgdCosine,
    /// Adam (0.9 / 0.999 / 1e-8) at a constant step size.
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Decoupled weight decay, applied as `θ -= lr · decay · θ` per step.
    pub weight_decay: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// A zero learning rate is accepted and yields a null update.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidInput("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch size must be >= 1".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidInput("weight decay must be >= 0".into()));
        }
        Ok(())
    }
}

/// A serialized trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub loss: LossKind,
    pub seed: u64,
    pub model: ScorerModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub model: ScorerModel,
    /// Mean surrogate loss over the full training set after each epoch.
    pub history: Vec<f64>,
}

pub(crate) fn check_samples(
    model: &ScorerModel,
    kind: LossKind,
    data: &[LabeledSample],
) -> Result<()> {
    if !kind.supports_experts(model.n_experts) {
        return Err(Error::InvalidDimension(format!(
            "loss {kind} does not accept {} experts",
            model.n_experts
        )));
    }
    for (i, s) in data.iter().enumerate() {
        if s.features.len() != model.input_dim {
            return Err(Error::InvalidInput(format!(
                "sample {i}: {} features, model expects {}",
                s.features.len(),
                model.input_dim
            )));
        }
        if s.label >= model.k_classes {
            return Err(Error::InvalidInput(format!(
                "sample {i}: label out of range"
            )));
        }
        if s.experts.len() != model.n_experts || s.experts.iter().any(|&m| m >= model.k_classes) {
            return Err(Error::InvalidInput(format!(
                "sample {i}: expert predictions do not match the model"
            )));
        }
    }
    Ok(())
}

/// Mean surrogate loss of `model` over `data`, accumulated in data order.
pub fn mean_loss(model: &ScorerModel, kind: LossKind, data: &[LabeledSample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let mut total = 0.0;
    for s in data {
        total += loss(kind, &model.forward(&s.features)?, s.label, &s.experts)?;
    }
    Ok(total / data.len() as f64)
}

struct Optimizer {
    kind: OptimizerKind,
    base_lr: f64,
    weight_decay: f64,
    total_steps: usize,
    step: usize,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Optimizer {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(cfg: &TrainConfig, n_params: usize, total_steps: usize) -> Self {
        let moments = if cfg.optimizer == OptimizerKind::Adam {
            n_params
        } else {
            0
        };
        Self {
            kind: cfg.optimizer,
            base_lr: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            total_steps,
            step: 0,
            first: vec![0.0; moments],
            second: vec![0.0; moments],
        }
    }

    fn apply(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            OptimizerKind::SgdCosine => {
                let frac = self.step as f64 / self.total_steps as f64;
                let lr = self.base_lr * 0.5 * (1.0 + (PI * frac).cos());
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g + lr * self.weight_decay * *p;
                }
            }
            OptimizerKind::Adam => {
                let t = (self.step + 1) as i32;
                let c1 = 1.0 - Self::BETA1.powi(t);
                let c2 = 1.0 - Self::BETA2.powi(t);
                let lr = self.base_lr;
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(&mut self.first)
                    .zip(&mut self.second)
                {
                    *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                    *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                    let update = (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
                    *p -= lr * update + lr * self.weight_decay * *p;
                }
            }
        }
        self.step += 1;
    }
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Train a copy of `model`. Deterministic for a given config and data order.
pub fn train(
    model: &ScorerModel,
    data: &[LabeledSample],
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    check_samples(model, cfg.loss, data)?;

    let mut model = model.clone();
    let n = data.len();
    let batches_per_epoch = n.div_ceil(cfg.batch_size);
    let mut params = model.flat_params();
    let mut opt = Optimizer::new(cfg, params.len(), batches_per_epoch * cfg.epochs);
    let mut grad = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if cfg.batch_size < n {
            let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(cfg.seed, epoch));
            order.sort_unstable();
            order.shuffle(&mut rng);
        }
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let traces: Vec<Trace> = idx
                .iter()
                .map(|&i| model.trace(&data[i].features))
                .collect::<Result<_>>()?;
            let scores: Vec<ScoreVector> = traces
                .iter()
                .map(|t| ScoreVector::new(t.output.clone(), model.k_classes, model.n_experts))
                .collect::<Result<_>>()
                .map_err(|_| Error::Diverged { epoch, batch })?;
            let labels: Vec<usize> = idx.iter().map(|&i| data[i].label).collect();
            let experts: Vec<Vec<usize>> = idx.iter().map(|&i| data[i].experts.clone()).collect();
            let out = batch_loss_and_grad(cfg.loss, &scores, &labels, &experts)?;
            if !out.mean_loss.is_finite() {
                return Err(Error::Diverged { epoch, batch });
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            for ((&i, trace), dout) in idx.iter().zip(&traces).zip(&out.grads) {
                model.backprop(&data[i].features, trace, dout, &mut grad);
            }
            opt.apply(&mut params, &grad);
            model.set_flat_params(&params)?;
        }
        let epoch_loss = mean_loss(&model, cfg.loss, data).map_err(|_| Error::Diverged {
            epoch,
            batch: batches_per_epoch - 1,
        })?;
        if !epoch_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: batches_per_epoch - 1,
            });
        }
        history.push(epoch_loss);
    }
    Ok(TrainOutput { model, history })
}

/// Probability estimate paired with each loss: the asymmetric softmax for
/// the asymmetric softmax losses, the clipped fractional estimators for the
/// symmetric losses, and the logistic link for asymmetric one-vs-all.
pub fn paired_estimate(kind: LossKind, u: &ScoreVector) -> ProbEstimate {
    match kind {
        LossKind::Asm | LossKind::AsmMulti => {
            asym_softmax_multi(u).expect("asymmetric softmax accepts any score vector")
        }
        LossKind::Ssm => ssm_clipped(u),
        LossKind::Sova => sova_clipped(u),
        LossKind::Aova => estimate_ova(u).estimate,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub decisions: Vec<Decision>,
    pub estimates: Vec<ProbEstimate>,
    /// 0-1-deferral loss per sample.
    pub losses: Vec<u8>,
}

/// Run the model as a deferral system over `data`.
pub fn evaluate(model: &ScorerModel, kind: LossKind, data: &[LabeledSample]) -> Result<Evaluation> {
    check_samples(model, kind, data)?;
    let mut decisions = Vec::with_capacity(data.len());
    let mut estimates = Vec::with_capacity(data.len());
    let mut losses = Vec::with_capacity(data.len());
    for s in data {
        let u = model.forward(&s.features)?;
        let d = decide(&u);
        losses.push(deferral_loss(d, s.label, &s.experts));
        decisions.push(d);
        estimates.push(paired_estimate(kind, &u));
    }
    Ok(Evaluation {
        decisions,
        estimates,
        losses,
    })
}
