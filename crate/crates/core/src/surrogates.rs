//! Surrogate losses for learning to defer and their analytic gradients.
//!
//! All losses share the shape `L(u, y, m)` where `u` is a score vector, `y`
//! the true label and `m` the expert prediction(s); the expert enters only
//! through the indicator `[m = y]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{rest_log_mass, ScoreVector};
use crate::numeric::{argmax, log_sum_exp, sigmoid, softmax_into, softmax_without, softplus};

/// Which L2D surrogate to optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Asymmetric-softmax cross-entropy (bounded estimator).
    Asm,
    /// Softmax cross-entropy over `K+1` outputs.
    Ssm,
    /// Asymmetric one-vs-all with the logistic binary loss.
    Aova,
    /// Symmetric one-vs-all plugged into `φ(u,y) + [m=y] φ(u,K+1)`.
    Sova,
    /// Asymmetric softmax with one binary term per expert.
    AsmMulti,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::Asm,
        LossKind::Ssm,
        LossKind::Aova,
        LossKind::Sova,
        LossKind::AsmMulti,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Asm => "asm",
            LossKind::Ssm => "ssm",
            LossKind::Aova => "aova",
            LossKind::Sova => "sova",
            LossKind::AsmMulti => "asm_multi",
        }
    }

    pub fn supports_experts(self, m: usize) -> bool {
        match self {
            LossKind::AsmMulti => m >= 1,
            _ => m == 1,
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown loss kind `{s}`")))
    }
}

/// Multiclass loss `φ(u, c)` over `K+1` classes, used in the generic
/// formulation `φ(u, y) + [m = y] φ(u, K+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MulticlassLoss {
    /// Softmax cross-entropy; permutation symmetric.
    CeSym,
    /// Asymmetric softmax multiclass loss.
    PhiAsm,
    /// Asymmetric one-vs-all multiclass loss.
    PhiOva,
}

fn check_labels(kind: LossKind, u: &ScoreVector, y: usize, m: &[usize]) -> Result<()> {
    if !kind.supports_experts(u.m()) {
        return Err(Error::InvalidDimension(format!(
            "loss {kind} does not accept {} expert scores",
            u.m()
        )));
    }
    if m.len() != u.m() {
        return Err(Error::InvalidDimension(format!(
            "{} expert predictions for {} expert scores",
            m.len(),
            u.m()
        )));
    }
    if y >= u.k() {
        return Err(Error::InvalidInput(format!(
            "label {y} out of range for {} classes",
            u.k()
        )));
    }
    if let Some(&bad) = m.iter().find(|&&mj| mj >= u.k()) {
        return Err(Error::InvalidInput(format!(
            "expert prediction {bad} out of range for {} classes",
            u.k()
        )));
    }
    Ok(())
}

/// Surrogate value `L(u, y, m)`.
pub fn loss(kind: LossKind, u: &ScoreVector, y: usize, m: &[usize]) -> Result<f64> {
    check_labels(kind, u, y, m)?;
    Ok(loss_and_grad_unchecked(kind, u, y, m).0)
}

/// Analytic gradient of [`loss`] with respect to `u`.
pub fn grad(kind: LossKind, u: &ScoreVector, y: usize, m: &[usize]) -> Result<Vec<f64>> {
    check_labels(kind, u, y, m)?;
    Ok(loss_and_grad_unchecked(kind, u, y, m).1)
}

/// Loss and gradient in one pass.
pub fn loss_and_grad(
    kind: LossKind,
    u: &ScoreVector,
    y: usize,
    m: &[usize],
) -> Result<(f64, Vec<f64>)> {
    check_labels(kind, u, y, m)?;
    Ok(loss_and_grad_unchecked(kind, u, y, m))
}

pub(crate) fn loss_and_grad_unchecked(
    kind: LossKind,
    u: &ScoreVector,
    y: usize,
    m: &[usize],
) -> (f64, Vec<f64>) {
    match kind {
        LossKind::Asm | LossKind::AsmMulti => asm(u, y, m),
        LossKind::Ssm => ssm(u, y, m[0] == y),
        LossKind::Aova => aova(u, y, m[0] == y),
        LossKind::Sova => sova(u, y, m[0] == y),
    }
}

// -log softmax_y(a) + Σ_j BCE(σ(b_j - r), [m_j = y]), with r the log of the
// class mass without its largest term. The max is piecewise smooth; at ties
// the smallest-index class is treated as the maximum.
fn asm(u: &ScoreVector, y: usize, m: &[usize]) -> (f64, Vec<f64>) {
    let k = u.k();
    let a = u.class_scores();
    let lse = log_sum_exp(a);
    let idx = argmax(a);
    let r = rest_log_mass(a);

    let mut g = vec![0.0; u.len()];
    softmax_into(a, &mut g[..k]);
    g[y] -= 1.0;
    let mut value = lse - a[y];

    let mut pull = 0.0;
    for (j, (&b, &mj)) in u.expert_scores().iter().zip(m).enumerate() {
        let z = b - r;
        let correct = mj == y;
        value += if correct { softplus(-z) } else { softplus(z) };
        let d = sigmoid(z) - if correct { 1.0 } else { 0.0 };
        g[k + j] = d;
        pull += d;
    }
    if pull != 0.0 {
        let w = softmax_without(a, idx);
        for (gi, wi) in g[..k].iter_mut().zip(&w) {
            *gi -= pull * wi;
        }
    }
    (value, g)
}

fn ssm(u: &ScoreVector, y: usize, correct: bool) -> (f64, Vec<f64>) {
    let v = u.values();
    let k = u.k();
    let lse = log_sum_exp(v);
    let t = if correct { 1.0 } else { 0.0 };
    let value = (lse - v[y]) + t * (lse - v[k]);
    let mut g = vec![0.0; v.len()];
    softmax_into(v, &mut g);
    for gi in &mut g {
        *gi *= 1.0 + t;
    }
    g[y] -= 1.0;
    g[k] -= t;
    (value, g)
}

// ξ(u_y) + Σ_{j≠y} ξ(-u_j) + [m=y](ξ(b) - ξ(-b)), ξ(z) = ln(1 + e^{-z}).
// The expert part collapses to a single logistic term with target [m=y].
fn aova(u: &ScoreVector, y: usize, correct: bool) -> (f64, Vec<f64>) {
    let k = u.k();
    let v = u.values();
    let mut value = 0.0;
    let mut g = vec![0.0; v.len()];
    for (j, &a) in v[..k].iter().enumerate() {
        if j == y {
            value += softplus(-a);
            g[j] = sigmoid(a) - 1.0;
        } else {
            value += softplus(a);
            g[j] = sigmoid(a);
        }
    }
    let b = v[k];
    if correct {
        value += softplus(-b);
        g[k] = sigmoid(b) - 1.0;
    } else {
        value += softplus(b);
        g[k] = sigmoid(b);
    }
    (value, g)
}

fn sova(u: &ScoreVector, y: usize, correct: bool) -> (f64, Vec<f64>) {
    let k = u.k();
    let v = u.values();
    let t = if correct { 1.0 } else { 0.0 };
    let base: f64 = v.iter().map(|&z| softplus(z)).sum();
    // φ(u,c) = Σ_j ξ(-u_j) - ξ(-u_c) + ξ(u_c)
    let phi = |c: usize| base - softplus(v[c]) + softplus(-v[c]);
    let value = phi(y) + t * phi(k);
    let mut g: Vec<f64> = v.iter().map(|&z| (1.0 + t) * sigmoid(z)).collect();
    g[y] -= 1.0;
    g[k] -= t;
    (value, g)
}

/// Multiclass loss `φ(u, c)` for `c ∈ 0..=K` (index `K` is the deferral
/// class). Requires a single-expert score vector.
pub fn phi(kind: MulticlassLoss, u: &ScoreVector, c: usize) -> Result<f64> {
    if u.m() != 1 {
        return Err(Error::InvalidDimension(
            "multiclass losses are defined for a single expert".into(),
        ));
    }
    let k = u.k();
    if c > k {
        return Err(Error::InvalidInput(format!(
            "class {c} out of range for {} outputs",
            k + 1
        )));
    }
    let v = u.values();
    Ok(match kind {
        MulticlassLoss::CeSym => log_sum_exp(v) - v[c],
        MulticlassLoss::PhiAsm => {
            let a = u.class_scores();
            let r = rest_log_mass(a);
            let b = v[k];
            // -ln ψ̃_{K+1} = softplus(r - b), -ln(1 - ψ̃_{K+1}) = softplus(b - r)
            if c < k {
                (log_sum_exp(a) - a[c]) + softplus(b - r)
            } else {
                softplus(r - b) - softplus(b - r)
            }
        }
        MulticlassLoss::PhiOva => {
            if c < k {
                v.iter()
                    .enumerate()
                    .map(|(j, &z)| if j == c { softplus(-z) } else { softplus(z) })
                    .sum()
            } else {
                softplus(-v[k]) - softplus(v[k])
            }
        }
    })
}

/// Generic formulation `φ(u, y) + [m = y] φ(u, K+1)` (single expert).
pub fn loss_general(phi_kind: MulticlassLoss, u: &ScoreVector, y: usize, m: usize) -> Result<f64> {
    if u.m() != 1 {
        return Err(Error::InvalidDimension(
            "the generic formulation takes a single expert".into(),
        ));
    }
    if y >= u.k() || m >= u.k() {
        return Err(Error::InvalidInput(format!(
            "label {y} / expert prediction {m} out of range for {} classes",
            u.k()
        )));
    }
    let mut value = phi(phi_kind, u, y)?;
    if m == y {
        value += phi(phi_kind, u, u.k())?;
    }
    Ok(value)
}

/// Mean loss over a batch and the gradient of that mean with respect to each
/// row of scores (row `i` holds `grad_i / n`).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub mean_loss: f64,
    pub grads: Vec<Vec<f64>>,
}

/// Batch loss and gradient; rows are accumulated sequentially in order.
pub fn batch_loss_and_grad(
    kind: LossKind,
    scores: &[ScoreVector],
    labels: &[usize],
    experts: &[Vec<usize>],
) -> Result<BatchLoss> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    if scores.len() != labels.len() || scores.len() != experts.len() {
        return Err(Error::InvalidDimension(format!(
            "batch has {} score rows, {} labels and {} expert rows",
            scores.len(),
            labels.len(),
            experts.len()
        )));
    }
    let n = scores.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(scores.len());
    for ((u, &y), m) in scores.iter().zip(labels).zip(experts) {
        let (l, mut g) = loss_and_grad(kind, u, y, m)?;
        total += l;
        for gi in &mut g {
            *gi /= n;
        }
        grads.push(g);
    }
    Ok(BatchLoss {
        mean_loss: total / n,
        grads,
    })
}
