//! Score vectors and the probability estimators that map them to class
//! posteriors and expert-accuracy estimates.
//!
//! Three families are provided:
//!
//! * the asymmetric softmax, whose class block is an ordinary softmax and
//!   whose expert coordinates are normalized against the class block with its
//!   largest term removed, so every output lies in `Δ^K × [0,1]^M`;
//! * the symmetric-softmax estimator, which divides the `K+1`-way softmax by
//!   `1 - ψ_{K+1}` and can report expert accuracies above 1;
//! * the one-vs-all estimator, a per-coordinate logistic link.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{argmax, log_sum_exp, log_sum_exp_without, sigmoid, softmax_into};

/// Raw scorer output: `K` class scores followed by `M` expert scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    values: Vec<f64>,
    k: usize,
    m: usize,
}

impl ScoreVector {
    pub fn new(values: Vec<f64>, k: usize, m: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidDimension(format!(
                "class count must be at least 2, got {k}"
            )));
        }
        if m < 1 {
            return Err(Error::InvalidDimension(
                "expert count must be at least 1".into(),
            ));
        }
        if values.len() != k + m {
            return Err(Error::InvalidDimension(format!(
                "score vector has length {}, expected K+M = {}",
                values.len(),
                k + m
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "score entry {i} is not finite"
            )));
        }
        Ok(Self { values, k, m })
    }

    /// Single-expert score vector of length `K + 1`.
    pub fn single(values: Vec<f64>) -> Result<Self> {
        let k = values.len().saturating_sub(1);
        Self::new(values, k, 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn class_scores(&self) -> &[f64] {
        &self.values[..self.k]
    }

    pub fn expert_scores(&self) -> &[f64] {
        &self.values[self.k..]
    }
}

/// Estimated class posteriors and per-expert accuracies.
///
/// `bounded` records whether the producing estimator guarantees every expert
/// accuracy lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbEstimate {
    pub class_probs: Vec<f64>,
    pub expert_acc: Vec<f64>,
    pub bounded: bool,
}

impl ProbEstimate {
    /// Predicted class: argmax of the class block, smallest index on ties.
    pub fn predicted_class(&self) -> usize {
        argmax(&self.class_probs)
    }
}

/// Output of the one-vs-all estimator: the per-coordinate sigmoids plus the
/// renormalized report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvaEstimate {
    /// `σ(u_i)` for every coordinate, classes then experts.
    pub raw: Vec<f64>,
    /// Class sigmoids renormalized onto the simplex; expert entries are the
    /// raw sigmoids.
    pub estimate: ProbEstimate,
}

/// Max-shifted softmax over the whole vector.
pub fn softmax(u: &[f64]) -> Result<Vec<f64>> {
    if u.len() < 2 {
        return Err(Error::InvalidDimension(format!(
            "softmax needs at least 2 entries, got {}",
            u.len()
        )));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("softmax input is not finite".into()));
    }
    let mut out = vec![0.0; u.len()];
    softmax_into(u, &mut out);
    Ok(out)
}

/// Asymmetric softmax for a single expert.
pub fn asym_softmax(u: &ScoreVector) -> Result<ProbEstimate> {
    if u.m() != 1 {
        return Err(Error::InvalidDimension(format!(
            "asym_softmax expects one expert score, got {}",
            u.m()
        )));
    }
    asym_softmax_multi(u)
}

/// Asymmetric softmax with `M` expert coordinates.
///
/// The class block is `softmax(u_1..u_K)`. Expert `j` is
/// `e^{b_j} / (e^{b_j} + Σ_y e^{u_y} - max_y e^{u_y})`; the sum with the
/// maximum removed is the sum over the non-argmax classes, so it is evaluated
/// as a log-sum-exp over those entries and the expert value becomes
/// `σ(b_j - r)` with no subtraction.
pub fn asym_softmax_multi(u: &ScoreVector) -> Result<ProbEstimate> {
    let classes = u.class_scores();
    let mut class_probs = vec![0.0; u.k()];
    softmax_into(classes, &mut class_probs);
    let r = rest_log_mass(classes);
    let expert_acc = u.expert_scores().iter().map(|&b| sigmoid(b - r)).collect();
    Ok(ProbEstimate {
        class_probs,
        expert_acc,
        bounded: true,
    })
}

/// `ln(Σ_y e^{u_y} - max_y e^{u_y})` over the class block.
pub(crate) fn rest_log_mass(classes: &[f64]) -> f64 {
    log_sum_exp_without(classes, argmax(classes))
}

/// Symmetric softmax estimator `ψ^sm_y / (1 - ψ^sm_{K+1})` (single expert).
///
/// The expert estimate is unbounded above; it exceeds 1 whenever
/// `ψ^sm_{K+1} > 1/2`.
pub fn estimate_ssm(u: &ScoreVector) -> Result<ProbEstimate> {
    if u.m() != 1 {
        return Err(Error::InvalidDimension(format!(
            "estimate_ssm expects one expert score, got {}",
            u.m()
        )));
    }
    let v = u.values();
    let k = u.k();
    let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = v.iter().map(|&x| (x - mx).exp()).collect();
    let class_mass: f64 = shifted[..k].iter().sum();
    let total = class_mass + shifted[k];
    // 1 - ψ_{K+1} is the class share of the softmax mass.
    if class_mass / total < f64::EPSILON {
        return Err(Error::Overflow(
            "expert softmax coordinate is 1 to machine precision".into(),
        ));
    }
    let class_probs = shifted[..k].iter().map(|&s| s / class_mass).collect();
    Ok(ProbEstimate {
        class_probs,
        expert_acc: vec![shifted[k] / class_mass],
        bounded: false,
    })
}

/// Estimator paired with the symmetric one-vs-all surrogate,
/// `σ(u_y) / (1 - σ(u_{K+1}))` (single expert, unbounded).
pub fn estimate_sova(u: &ScoreVector) -> Result<ProbEstimate> {
    if u.m() != 1 {
        return Err(Error::InvalidDimension(format!(
            "estimate_sova expects one expert score, got {}",
            u.m()
        )));
    }
    let b = u.expert_scores()[0];
    let denom = sigmoid(-b);
    if denom < f64::EPSILON {
        return Err(Error::Overflow(
            "expert sigmoid is 1 to machine precision".into(),
        ));
    }
    let raw: Vec<f64> = u.class_scores().iter().map(|&a| sigmoid(a)).collect();
    let s: f64 = raw.iter().sum();
    Ok(ProbEstimate {
        class_probs: raw.iter().map(|r| r / s).collect(),
        expert_acc: vec![sigmoid(b) / denom],
        bounded: false,
    })
}

/// One-vs-all estimator: every coordinate through the logistic link.
pub fn estimate_ova(u: &ScoreVector) -> OvaEstimate {
    let raw: Vec<f64> = u.values().iter().map(|&z| sigmoid(z)).collect();
    let class_raw = &raw[..u.k()];
    let s: f64 = class_raw.iter().sum();
    let class_probs = if s > 0.0 {
        class_raw.iter().map(|r| r / s).collect()
    } else {
        // every class sigmoid underflowed; fall back to the class softmax
        let mut out = vec![0.0; u.k()];
        softmax_into(u.class_scores(), &mut out);
        out
    };
    let expert_acc = raw[u.k()..].to_vec();
    OvaEstimate {
        raw,
        estimate: ProbEstimate {
            class_probs,
            expert_acc,
            bounded: true,
        },
    }
}

/// Clamp expert accuracies into `[0, 1]`; class probabilities are untouched.
pub fn clip_estimate(e: &ProbEstimate) -> ProbEstimate {
    ProbEstimate {
        class_probs: e.class_probs.clone(),
        expert_acc: e.expert_acc.iter().map(|a| a.clamp(0.0, 1.0)).collect(),
        bounded: true,
    }
}

/// Clipped symmetric-softmax estimate that never fails: the class block is
/// the class softmax, and an expert ratio that overflows saturates at 1.
pub(crate) fn ssm_clipped(u: &ScoreVector) -> ProbEstimate {
    let classes = u.class_scores();
    let mut class_probs = vec![0.0; u.k()];
    softmax_into(classes, &mut class_probs);
    let ratio = (u.expert_scores()[0] - log_sum_exp(classes)).exp();
    ProbEstimate {
        class_probs,
        expert_acc: vec![ratio.min(1.0)],
        bounded: true,
    }
}

/// Clipped symmetric one-vs-all estimate that never fails.
pub(crate) fn sova_clipped(u: &ScoreVector) -> ProbEstimate {
    let raw: Vec<f64> = u.class_scores().iter().map(|&a| sigmoid(a)).collect();
    let s: f64 = raw.iter().sum();
    let class_probs = if s > 0.0 {
        raw.iter().map(|r| r / s).collect()
    } else {
        let mut out = vec![0.0; u.k()];
        softmax_into(u.class_scores(), &mut out);
        out
    };
    // σ(b) / σ(-b) = e^b
    let ratio = u.expert_scores()[0].exp();
    ProbEstimate {
        class_probs,
        expert_acc: vec![ratio.min(1.0)],
        bounded: true,
    }
}
