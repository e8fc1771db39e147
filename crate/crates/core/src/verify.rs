//! Randomized property sweeps over the losses, estimators and oracles.
//!
//! Each sweep draws its cases from a seeded generator up front and then
//! evaluates them in parallel, so a report depends only on the seed and the
//! sweep sizes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::estimators::{
    asym_softmax, asym_softmax_multi, clip_estimate, estimate_ova, estimate_ssm, ScoreVector,
};
use crate::numeric::argmax;
use crate::oracle::{
    bayes_decision, check_regret_bound, decide, minimize_conditional, minimize_conditional_numeric,
    ConditionalPoint,
};
use crate::surrogates::{loss, loss_and_grad, loss_general, LossKind, MulticlassLoss};

/// Number of random cases per sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSizes {
    pub gradient: usize,
    pub boundedness: usize,
    pub recovery: usize,
    pub equivalence: usize,
    pub regret: usize,
    pub multi_expert: usize,
}

impl Default for SweepSizes {
    fn default() -> Self {
        Self {
            gradient: 100,
            boundedness: 100_000,
            recovery: 1000,
            equivalence: 10_000,
            regret: 10_000,
            multi_expert: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed violation measure (check-specific).
    pub worst: f64,
    /// Up to [`MAX_COUNTEREXAMPLES`] failing cases.
    pub counterexamples: Vec<Value>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

pub const MAX_COUNTEREXAMPLES: usize = 10;

/// Outcome of one case: violation measure and an optional dump on failure.
type CaseOutcome = (f64, Option<Value>);

fn collect(name: &str, outcomes: Vec<CaseOutcome>) -> CheckResult {
    let cases = outcomes.len();
    let worst = outcomes.iter().map(|o| o.0).fold(0.0, f64::max);
    let failed: Vec<Value> = outcomes.into_iter().filter_map(|o| o.1).collect();
    CheckResult {
        name: name.to_string(),
        cases,
        failures: failed.len(),
        worst,
        counterexamples: failed.into_iter().take(MAX_COUNTEREXAMPLES).collect(),
    }
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Random simplex vector with every entry in `[lo, hi]`.
pub fn random_posterior(rng: &mut ChaCha8Rng, k: usize, lo: f64, hi: f64) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..k)
            .map(|_| -rng.random::<f64>().max(1e-300).ln())
            .collect();
        let s: f64 = w.iter().sum();
        let eta: Vec<f64> = w.iter().map(|x| x / s).collect();
        if eta.iter().all(|&e| e >= lo && e <= hi) {
            return eta;
        }
    }
}

/// Smallest gap between the largest class score and any other class score.
fn class_gap(classes: &[f64]) -> f64 {
    let top = argmax(classes);
    classes
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != top)
        .map(|(_, &v)| classes[top] - v)
        .fold(f64::INFINITY, f64::min)
}

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-5;

/// Central-difference check of the analytic gradient for one loss.
pub fn gradient_sweep(kind: LossKind, cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(cases);
    while inputs.len() < cases {
        let k = [2, 5, 10][rng.random_range(0..3)];
        let m = if kind == LossKind::AsmMulti {
            rng.random_range(1..=3)
        } else {
            1
        };
        let u = uniform_vec(&mut rng, k + m, -4.0, 4.0);
        // the class maximum is non-differentiable at ties
        if matches!(kind, LossKind::Asm | LossKind::AsmMulti) && class_gap(&u[..k]) < 1e-3 {
            continue;
        }
        let y = rng.random_range(0..k);
        let preds: Vec<usize> = (0..m).map(|_| rng.random_range(0..k)).collect();
        inputs.push((k, m, u, y, preds));
    }
    let outcomes = inputs
        .into_par_iter()
        .map(|(k, m, u, y, preds)| {
            let sv = ScoreVector::new(u.clone(), k, m).expect("finite scores");
            let (_, g) = loss_and_grad(kind, &sv, y, &preds).expect("valid case");
            let mut worst = 0.0f64;
            for i in 0..u.len() {
                let mut plus = u.clone();
                let mut minus = u.clone();
                plus[i] += FD_STEP;
                minus[i] -= FD_STEP;
                let f = |v: Vec<f64>| {
                    loss(kind, &ScoreVector::new(v, k, m).unwrap(), y, &preds).unwrap()
                };
                let fd = (f(plus) - f(minus)) / (2.0 * FD_STEP);
                let rel = (g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1.0);
                worst = worst.max(rel);
            }
            let dump = (worst >= FD_TOL)
                .then(|| json!({"u": u, "k": k, "y": y, "m": preds, "rel_err": worst}));
            (worst, dump)
        })
        .collect();
    collect(&format!("gradient_{kind}"), outcomes)
}

/// Range and maxima preservation of the asymmetric softmax.
pub fn boundedness_sweep(cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<(usize, usize, Vec<f64>, Vec<f64>)> = (0..cases)
        .map(|_| {
            let k = rng.random_range(2..=10);
            let m = if rng.random_bool(0.5) {
                1
            } else {
                rng.random_range(2..=3)
            };
            let wide = uniform_vec(&mut rng, k + m, -50.0, 50.0);
            let narrow = uniform_vec(&mut rng, k + m, -10.0, 10.0);
            (k, m, wide, narrow)
        })
        .collect();
    let outcomes = inputs
        .into_par_iter()
        .map(|(k, m, wide, narrow)| {
            let e = asym_softmax_multi(&ScoreVector::new(wide.clone(), k, m).unwrap()).unwrap();
            let sum_err = (e.class_probs.iter().sum::<f64>() - 1.0).abs();
            let in_range = e
                .class_probs
                .iter()
                .chain(&e.expert_acc)
                .all(|v| (0.0..=1.0).contains(v));

            let e2 = asym_softmax_multi(&ScoreVector::new(narrow.clone(), k, m).unwrap()).unwrap();
            let out: Vec<f64> = e2
                .class_probs
                .iter()
                .chain(&e2.expert_acc)
                .copied()
                .collect();
            let unique = {
                let top = argmax(&narrow);
                narrow
                    .iter()
                    .enumerate()
                    .all(|(i, &v)| i == top || v < narrow[top])
            };
            let argmax_ok = !unique || argmax(&out) == argmax(&narrow);
            let ok = sum_err < 1e-9 && in_range && argmax_ok;
            let dump = (!ok).then(|| json!({"k": k, "m": m, "wide": wide, "narrow": narrow}));
            (sum_err, dump)
        })
        .collect();
    collect("asym_softmax_bounded_and_maxima_preserving", outcomes)
}

fn centered(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Conditional-risk minimizers recover `(η, p)` through their estimators.
pub fn recovery_sweep(cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<ConditionalPoint> = (0..cases)
        .map(|_| {
            let k = rng.random_range(2..=4);
            let eta = random_posterior(&mut rng, k, 0.05, 0.95);
            let p = rng.random_range(0.05..0.95);
            ConditionalPoint::new(eta, vec![p]).unwrap()
        })
        .collect();
    let outcomes = points
        .into_par_iter()
        .map(|c| {
            let truth: Vec<f64> = c.eta.iter().chain(&c.p).copied().collect();
            let mut worst = 0.0f64;
            let mut ok = true;
            let mut note = Vec::new();

            let closed = minimize_conditional(LossKind::Asm, &c).unwrap();
            let e = asym_softmax(&closed).unwrap();
            let got: Vec<f64> = e.class_probs.iter().chain(&e.expert_acc).copied().collect();
            let err = linf(&got, &truth);
            worst = worst.max(err / 1e-4);
            ok &= err < 1e-4;

            let max_eta = c.eta.iter().copied().fold(0.0, f64::max);
            if (max_eta - c.p[0]).abs() > 1e-6 && decide(&closed) != bayes_decision(&c) {
                ok = false;
                note.push("decision mismatch");
            }

            match minimize_conditional_numeric(LossKind::Asm, &c) {
                Ok(num) => {
                    let err = linf(&centered(num.values()), &centered(closed.values()));
                    worst = worst.max(err / 1e-3);
                    ok &= err < 1e-3;
                }
                Err(_) => {
                    ok = false;
                    note.push("asm numeric minimizer failed");
                }
            }
            match minimize_conditional(LossKind::Ssm, &c).and_then(|u| estimate_ssm(&u)) {
                Ok(e) => {
                    let got: Vec<f64> =
                        e.class_probs.iter().chain(&e.expert_acc).copied().collect();
                    let err = linf(&got, &truth);
                    worst = worst.max(err / 1e-3);
                    ok &= err < 1e-3;
                }
                Err(_) => {
                    ok = false;
                    note.push("ssm minimizer failed");
                }
            }
            match minimize_conditional(LossKind::Aova, &c) {
                Ok(u) => {
                    let err = linf(&estimate_ova(&u).raw, &truth);
                    worst = worst.max(err / 1e-3);
                    ok &= err < 1e-3;
                }
                Err(_) => {
                    ok = false;
                    note.push("aova minimizer failed");
                }
            }
            let dump = (!ok).then(|| json!({"eta": c.eta, "p": c.p, "notes": note}));
            (worst, dump)
        })
        .collect();
    collect("minimizer_recovery", outcomes)
}

/// The generic formulation with the asymmetric multiclass losses reproduces
/// the asymmetric softmax and one-vs-all surrogates.
pub fn equivalence_sweep(cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<(Vec<f64>, usize, usize)> = (0..cases)
        .map(|_| {
            let k = rng.random_range(2..=10);
            (
                uniform_vec(&mut rng, k + 1, -10.0, 10.0),
                rng.random_range(0..k),
                rng.random_range(0..k),
            )
        })
        .collect();
    let outcomes = inputs
        .into_par_iter()
        .map(|(u, y, m)| {
            let sv = ScoreVector::single(u.clone()).unwrap();
            let d1 = (loss_general(MulticlassLoss::PhiAsm, &sv, y, m).unwrap()
                - loss(LossKind::Asm, &sv, y, &[m]).unwrap())
            .abs();
            let d2 = (loss_general(MulticlassLoss::PhiOva, &sv, y, m).unwrap()
                - loss(LossKind::Aova, &sv, y, &[m]).unwrap())
            .abs();
            let worst = d1.max(d2);
            let dump = (worst >= 1e-9).then(|| json!({"u": u, "y": y, "m": m, "diff": worst}));
            (worst, dump)
        })
        .collect();
    collect("generic_formulation_equivalence", outcomes)
}

/// Pointwise regret-transfer inequality for the asymmetric softmax loss.
pub fn regret_sweep(cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<(ConditionalPoint, Vec<f64>)> = (0..cases)
        .map(|_| {
            let k = rng.random_range(2..=4);
            let eta = random_posterior(&mut rng, k, 1e-3, 1.0);
            let p = rng.random_range(0.01..0.99);
            let u = uniform_vec(&mut rng, k + 1, -5.0, 5.0);
            (ConditionalPoint::new(eta, vec![p]).unwrap(), u)
        })
        .collect();
    let outcomes = inputs
        .into_par_iter()
        .map(|(c, u)| {
            let check = check_regret_bound(&ScoreVector::single(u.clone()).unwrap(), &c).unwrap();
            let dump = (!check.holds).then(
                || json!({"eta": c.eta, "p": c.p, "u": u, "lhs": check.lhs, "rhs": check.rhs}),
            );
            ((check.lhs - check.rhs).max(0.0), dump)
        })
        .collect();
    collect("regret_transfer_bound", outcomes)
}

/// The symmetric softmax estimator exceeds 1 where the asymmetric one cannot.
pub fn unboundedness_witness() -> CheckResult {
    let u = ScoreVector::single(vec![0.0, 0.0, 4f64.ln()]).unwrap();
    let e = estimate_ssm(&u).unwrap();
    let clipped = clip_estimate(&e);
    let ok = e.expert_acc[0] == 2.0 && clipped.expert_acc[0] == 1.0;
    let dump = (!ok).then(|| json!({"expert_acc": e.expert_acc, "clipped": clipped.expert_acc}));
    collect(
        "symmetric_estimator_unbounded",
        vec![((e.expert_acc[0] - 2.0).abs(), dump)],
    )
}

/// Per-expert recovery for the multi-expert loss through numerical
/// minimization.
pub fn multi_expert_sweep(cases: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<ConditionalPoint> = (0..cases)
        .map(|_| {
            let k = rng.random_range(2..=4);
            let eta = random_posterior(&mut rng, k, 0.05, 0.95);
            let p = uniform_vec(&mut rng, 2, 0.05, 0.95);
            ConditionalPoint::new(eta, p).unwrap()
        })
        .collect();
    let outcomes = points
        .into_par_iter()
        .map(|c| {
            let truth: Vec<f64> = c.eta.iter().chain(&c.p).copied().collect();
            match minimize_conditional_numeric(LossKind::AsmMulti, &c) {
                Ok(u) => {
                    let e = asym_softmax_multi(&u).unwrap();
                    let got: Vec<f64> =
                        e.class_probs.iter().chain(&e.expert_acc).copied().collect();
                    let err = linf(&got, &truth);
                    let dump = (err >= 1e-3).then(|| json!({"eta": c.eta, "p": c.p, "err": err}));
                    (err, dump)
                }
                Err(e) => (
                    f64::INFINITY,
                    Some(json!({"eta": c.eta, "p": c.p, "error": e.to_string()})),
                ),
            }
        })
        .collect();
    collect("multi_expert_recovery", outcomes)
}

/// Run every sweep.
pub fn run_all(sizes: &SweepSizes, seed: u64) -> VerifyReport {
    let mut checks: Vec<CheckResult> = LossKind::ALL
        .iter()
        .enumerate()
        .map(|(i, &kind)| gradient_sweep(kind, sizes.gradient, seed.wrapping_add(i as u64)))
        .collect();
    checks.push(boundedness_sweep(sizes.boundedness, seed.wrapping_add(10)));
    checks.push(recovery_sweep(sizes.recovery, seed.wrapping_add(11)));
    checks.push(equivalence_sweep(sizes.equivalence, seed.wrapping_add(12)));
    checks.push(regret_sweep(sizes.regret, seed.wrapping_add(13)));
    checks.push(unboundedness_witness());
    checks.push(multi_expert_sweep(
        sizes.multi_expert,
        seed.wrapping_add(14),
    ));
    let passed = checks.iter().all(CheckResult::passed);
    VerifyReport {
        seed,
        checks,
        passed,
    }
}
