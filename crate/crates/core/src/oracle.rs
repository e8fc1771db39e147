//! Pointwise ground truth: the Bayes-optimal deferral rule, the
//! 0-1-deferral loss, exact conditional surrogate risks and their minimizers,
//! and the pointwise regret-transfer check for the asymmetric softmax loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ScoreVector;
use crate::numeric::argmax;
use crate::surrogates::{loss_and_grad_unchecked, LossKind};

/// True class posterior `η(x)` and expert accuracies `Pr(M_j = Y | x)` at a
/// single point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalPoint {
    pub eta: Vec<f64>,
    pub p: Vec<f64>,
}

impl ConditionalPoint {
    pub fn new(eta: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if eta.len() < 2 {
            return Err(Error::InvalidDimension(format!(
                "posterior needs at least 2 classes, got {}",
                eta.len()
            )));
        }
        if p.is_empty() {
            return Err(Error::InvalidDimension("no expert accuracies".into()));
        }
        if eta.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
            return Err(Error::InvalidInput("posterior entries must be >= 0".into()));
        }
        let s: f64 = eta.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "posterior sums to {s}, expected 1"
            )));
        }
        if p.iter().any(|&q| !(0.0..=1.0).contains(&q)) {
            return Err(Error::InvalidInput(
                "expert accuracies must lie in [0, 1]".into(),
            ));
        }
        Ok(Self { eta, p })
    }

    pub fn k(&self) -> usize {
        self.eta.len()
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }
}

/// A deferral system's action on one input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Predict(usize),
    Defer(usize),
}

impl Decision {
    pub fn is_defer(self) -> bool {
        matches!(self, Decision::Defer(_))
    }
}

/// Bayes-optimal rule: defer to the most accurate expert iff its accuracy
/// strictly exceeds the largest class posterior.
pub fn bayes_decision(c: &ConditionalPoint) -> Decision {
    let best_class = argmax(&c.eta);
    let best_expert = argmax(&c.p);
    if c.eta[best_class] < c.p[best_expert] {
        Decision::Defer(best_expert)
    } else {
        Decision::Predict(best_class)
    }
}

/// Decision induced by a score vector: defer iff the best expert score is
/// strictly larger than every class score.
pub fn decide(u: &ScoreVector) -> Decision {
    let classes = u.class_scores();
    let experts = u.expert_scores();
    let best_class = argmax(classes);
    let best_expert = argmax(experts);
    if experts[best_expert] > classes[best_class] {
        Decision::Defer(best_expert)
    } else {
        Decision::Predict(best_class)
    }
}

/// 0-1-deferral loss of a decision against the label and expert predictions.
pub fn deferral_loss(d: Decision, y: usize, m: &[usize]) -> u8 {
    let wrong = match d {
        Decision::Predict(c) => c != y,
        Decision::Defer(j) => m.get(j).is_none_or(|&mj| mj != y),
    };
    u8::from(wrong)
}

/// Expected 0-1-deferral loss of a decision at a point.
pub fn pointwise_risk(d: Decision, c: &ConditionalPoint) -> f64 {
    match d {
        Decision::Predict(y) => 1.0 - c.eta[y],
        Decision::Defer(j) => 1.0 - c.p[j],
    }
}

fn check_dims(kind: LossKind, u: &ScoreVector, c: &ConditionalPoint) -> Result<()> {
    if u.k() != c.k() || u.m() != c.m() {
        return Err(Error::InvalidDimension(format!(
            "score vector is K={} M={}, conditional point is K={} M={}",
            u.k(),
            u.m(),
            c.k(),
            c.m()
        )));
    }
    if !kind.supports_experts(u.m()) {
        return Err(Error::InvalidDimension(format!(
            "loss {kind} does not accept {} experts",
            u.m()
        )));
    }
    Ok(())
}

/// Exact conditional risk `Σ_y η_y E[L(u, y, m) | y]`, with expert `j`
/// independently correct with probability `p_j`. Every shipped loss depends
/// on `m` only through `[m_j = y]`, so enumerating the `2^M` correctness
/// patterns gives the expectation exactly.
pub fn conditional_risk(kind: LossKind, u: &ScoreVector, c: &ConditionalPoint) -> Result<f64> {
    check_dims(kind, u, c)?;
    Ok(risk_and_grad(kind, u, c).0)
}

/// Gradient of [`conditional_risk`] with respect to `u`.
pub fn conditional_risk_grad(
    kind: LossKind,
    u: &ScoreVector,
    c: &ConditionalPoint,
) -> Result<Vec<f64>> {
    check_dims(kind, u, c)?;
    Ok(risk_and_grad(kind, u, c).1)
}

fn risk_and_grad(kind: LossKind, u: &ScoreVector, c: &ConditionalPoint) -> (f64, Vec<f64>) {
    let k = c.k();
    let m = c.m();
    let mut risk = 0.0;
    let mut g = vec![0.0; u.len()];
    let mut preds = vec![0; m];
    for (y, &ey) in c.eta.iter().enumerate() {
        if ey == 0.0 {
            continue;
        }
        let wrong = (y + 1) % k;
        for pattern in 0..(1usize << m) {
            let mut weight = ey;
            for (j, pred) in preds.iter_mut().enumerate() {
                if pattern >> j & 1 == 1 {
                    *pred = y;
                    weight *= c.p[j];
                } else {
                    *pred = wrong;
                    weight *= 1.0 - c.p[j];
                }
            }
            if weight == 0.0 {
                continue;
            }
            let (l, gl) = loss_and_grad_unchecked(kind, u, y, &preds);
            risk += weight * l;
            for (gi, d) in g.iter_mut().zip(gl) {
                *gi += weight * d;
            }
        }
    }
    (risk, g)
}

/// Step size of the gradient-descent minimizer.
pub const GD_STEP: f64 = 0.5;
/// Iteration budget of the gradient-descent minimizer.
pub const GD_ITERATIONS: usize = 10_000;
/// Gradient norm below which a minimizer is accepted as stationary.
pub const STATIONARY_TOL: f64 = 1e-6;

fn check_interior(c: &ConditionalPoint) -> Result<()> {
    if c.eta.iter().any(|&e| e <= 0.0) {
        return Err(Error::Boundary(
            "a zero class posterior has no finite minimizer".into(),
        ));
    }
    if c.p.iter().any(|&q| q <= 0.0 || q >= 1.0) {
        return Err(Error::Boundary(
            "expert accuracy 0 or 1 has no finite minimizer".into(),
        ));
    }
    Ok(())
}

/// Minimizer of the conditional risk. The asymmetric softmax losses use the
/// closed form `u_y = ln η_y`, `u_{K+j} = ln(p_j (1 - max η) / (1 - p_j))`;
/// the other losses run [`minimize_conditional_numeric`].
pub fn minimize_conditional(kind: LossKind, c: &ConditionalPoint) -> Result<ScoreVector> {
    if !kind.supports_experts(c.m()) {
        return Err(Error::InvalidDimension(format!(
            "loss {kind} does not accept {} experts",
            c.m()
        )));
    }
    check_interior(c)?;
    match kind {
        LossKind::Asm | LossKind::AsmMulti => {
            let max_eta = c.eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let values = c
                .eta
                .iter()
                .map(|e| e.ln())
                .chain(c.p.iter().map(|&q| (q * (1.0 - max_eta) / (1.0 - q)).ln()))
                .collect();
            ScoreVector::new(values, c.k(), c.m())
        }
        _ => minimize_conditional_numeric(kind, c),
    }
}

/// Plain gradient descent on the conditional risk from the origin, then a
/// stationarity check on the final iterate.
pub fn minimize_conditional_numeric(kind: LossKind, c: &ConditionalPoint) -> Result<ScoreVector> {
    check_interior(c)?;
    let mut u = ScoreVector::new(vec![0.0; c.k() + c.m()], c.k(), c.m())?;
    check_dims(kind, &u, c)?;
    let mut grad_norm = f64::INFINITY;
    for _ in 0..GD_ITERATIONS {
        let (_, g) = risk_and_grad(kind, &u, c);
        grad_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if grad_norm < 1e-12 {
            break;
        }
        let next: Vec<f64> = u
            .values()
            .iter()
            .zip(&g)
            .map(|(ui, gi)| ui - GD_STEP * gi)
            .collect();
        u = ScoreVector::new(next, c.k(), c.m())?;
    }
    let (_, g) = risk_and_grad(kind, &u, c);
    grad_norm = grad_norm.min(g.iter().map(|x| x * x).sum::<f64>().sqrt());
    if grad_norm >= STATIONARY_TOL {
        return Err(Error::NonConvergence {
            iterations: GD_ITERATIONS,
            grad_norm,
        });
    }
    Ok(u)
}

/// Both sides of the pointwise regret-transfer inequality for the
/// asymmetric softmax loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretCheck {
    /// Larger of the classifier 0-1 excess and the 0-1-deferral excess.
    pub lhs: f64,
    /// `sqrt(2 · surrogate excess)`.
    pub rhs: f64,
    pub holds: bool,
}

/// Pointwise check of `max(classifier excess, deferral excess) <=
/// sqrt(2 (R(u) - R(u*)))` for the single-expert asymmetric softmax loss.
pub fn check_regret_bound(u: &ScoreVector, c: &ConditionalPoint) -> Result<RegretCheck> {
    check_dims(LossKind::Asm, u, c)?;
    let best = minimize_conditional(LossKind::Asm, c)?;
    let excess_surrogate =
        conditional_risk(LossKind::Asm, u, c)? - conditional_risk(LossKind::Asm, &best, c)?;

    let max_eta = c.eta[argmax(&c.eta)];
    let class_excess = max_eta - c.eta[argmax(u.class_scores())];
    let deferral_excess = pointwise_risk(decide(u), c) - pointwise_risk(bayes_decision(c), c);

    let lhs = class_excess.max(deferral_excess);
    let rhs = (2.0 * excess_surrogate.max(0.0)).sqrt();
    Ok(RegretCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-9,
    })
}
