//! Evaluation statistics for deferral systems.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ProbEstimate;
use crate::oracle::{deferral_loss, ConditionalPoint, Decision};
use crate::synthetic::LabeledSample;
use crate::train::Evaluation;

pub const DEFAULT_ECE_BINS: usize = 15;
pub const DEFAULT_BUDGETS: [f64; 3] = [0.1, 0.2, 0.3];

/// Mean 0-1-deferral loss.
pub fn system_error(
    decisions: &[Decision],
    labels: &[usize],
    experts: &[Vec<usize>],
) -> Result<f64> {
    if decisions.is_empty() {
        return Err(Error::InvalidInput("no decisions".into()));
    }
    if decisions.len() != labels.len() || decisions.len() != experts.len() {
        return Err(Error::InvalidInput(format!(
            "{} decisions, {} labels, {} expert rows",
            decisions.len(),
            labels.len(),
            experts.len()
        )));
    }
    let wrong: usize = decisions
        .iter()
        .zip(labels)
        .zip(experts)
        .map(|((&d, &y), m)| usize::from(deferral_loss(d, y, m)))
        .sum();
    Ok(wrong as f64 / decisions.len() as f64)
}

/// Fraction of inputs the classifier answers itself.
pub fn coverage(decisions: &[Decision]) -> Result<f64> {
    if decisions.is_empty() {
        return Err(Error::InvalidInput("no decisions".into()));
    }
    let kept = decisions.iter().filter(|d| !d.is_defer()).count();
    Ok(kept as f64 / decisions.len() as f64)
}

/// Equal-width bin for `c ∈ [0, 1]`: bins are `(i/B, (i+1)/B]`, with 0 in
/// the first bin and 1 in the last.
fn bin_index(c: f64, bins: usize) -> usize {
    let b = bins as f64;
    let mut idx = ((c * b).ceil() as usize).saturating_sub(1).min(bins - 1);
    // correct for rounding in c * b against the exact edge i / B
    while idx > 0 && c <= idx as f64 / b {
        idx -= 1;
    }
    while idx + 1 < bins && c > (idx + 1) as f64 / b {
        idx += 1;
    }
    idx
}

/// Expected calibration error `Σ_i b_i |p_i - c_i|` over equal-width bins.
pub fn ece(confidences: &[f64], correct: &[bool], bins: usize) -> Result<f64> {
    if confidences.len() != correct.len() {
        return Err(Error::InvalidInput(format!(
            "{} confidences, {} outcomes",
            confidences.len(),
            correct.len()
        )));
    }
    if confidences.is_empty() {
        return Err(Error::InvalidInput("no confidences".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidInput("bin count must be >= 1".into()));
    }
    if let Some(c) = confidences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::InvalidInput(format!(
            "confidence {c} outside [0, 1]; clip before computing ECE"
        )));
    }
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0; bins];
    let mut hits = vec![0usize; bins];
    for (&c, &ok) in confidences.iter().zip(correct) {
        let i = bin_index(c, bins);
        count[i] += 1;
        conf_sum[i] += c;
        hits[i] += usize::from(ok);
    }
    let n = confidences.len() as f64;
    Ok((0..bins)
        .filter(|&i| count[i] > 0)
        .map(|i| {
            let nb = count[i] as f64;
            (nb / n) * (conf_sum[i] / nb - hits[i] as f64 / nb).abs()
        })
        .sum())
}

/// System error after forcing the deferral fraction down to `budget`.
///
/// Deferred samples are returned to the classifier (class-block argmax) in
/// ascending order of the estimated accuracy of the expert they were routed
/// to, ties broken by sample index.
pub fn budgeted_error(
    decisions: &[Decision],
    estimates: &[ProbEstimate],
    labels: &[usize],
    experts: &[Vec<usize>],
    budget: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&budget) {
        return Err(Error::InvalidInput(format!(
            "budget {budget} outside [0, 1]"
        )));
    }
    if estimates.len() != decisions.len() {
        return Err(Error::InvalidInput(format!(
            "{} decisions, {} estimates",
            decisions.len(),
            estimates.len()
        )));
    }
    let adjusted = apply_budget(decisions, estimates, budget);
    system_error(&adjusted, labels, experts)
}

pub(crate) fn apply_budget(
    decisions: &[Decision],
    estimates: &[ProbEstimate],
    budget: f64,
) -> Vec<Decision> {
    let n = decisions.len();
    let allowed = (budget * n as f64 + 1e-9).floor() as usize;
    let mut deferred: Vec<(usize, f64)> = decisions
        .iter()
        .enumerate()
        .filter_map(|(i, d)| match *d {
            Decision::Defer(j) => Some((i, estimates[i].expert_acc[j])),
            Decision::Predict(_) => None,
        })
        .collect();
    let mut out = decisions.to_vec();
    if deferred.len() <= allowed {
        return out;
    }
    deferred.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let excess = deferred.len() - allowed;
    for &(i, _) in &deferred[..excess] {
        out[i] = Decision::Predict(estimates[i].predicted_class());
    }
    out
}

/// Binned counts of estimated (and optionally true) expert accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges from 0 to 1.
    pub edges: Vec<f64>,
    pub estimated: Vec<usize>,
    pub truth: Option<Vec<usize>>,
}

impl Histogram {
    /// CSV with header `bin_lo,bin_hi,count_estimated,count_true`; the last
    /// column is empty when no ground truth was supplied.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count_estimated,count_true\n");
        for i in 0..self.estimated.len() {
            let t = self
                .truth
                .as_ref()
                .map(|t| t[i].to_string())
                .unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{}\n",
                self.edges[i],
                self.edges[i + 1],
                self.estimated[i],
                t
            ));
        }
        s
    }
}

fn counts(values: &[f64], bins: usize) -> Vec<usize> {
    let mut out = vec![0; bins];
    for &v in values {
        out[bin_index(v.clamp(0.0, 1.0), bins)] += 1;
    }
    out
}

/// Histograms of estimated and true expert accuracy on a shared grid.
/// Values are clamped into `[0, 1]`; `bins` of 0 is treated as 1.
pub fn accuracy_histograms(estimated: &[f64], truth: Option<&[f64]>, bins: usize) -> Histogram {
    let bins = bins.max(1);
    Histogram {
        edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(),
        estimated: counts(estimated, bins),
        truth: truth.map(|t| counts(t, bins)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub error: f64,
    pub coverage: f64,
    /// ECE of the expert-accuracy estimates against expert correctness.
    pub ece: f64,
    /// Budget (as written, e.g. `"0.1"`) to budgeted error.
    pub budgeted_errors: BTreeMap<String, f64>,
    pub histogram: Histogram,
}

/// Expert-accuracy confidences and outcomes, pooled over experts.
pub fn expert_calibration_pairs(
    estimates: &[ProbEstimate],
    data: &[LabeledSample],
) -> (Vec<f64>, Vec<bool>) {
    let mut conf = Vec::new();
    let mut ok = Vec::new();
    for (e, s) in estimates.iter().zip(data) {
        for (a, &m) in e.expert_acc.iter().zip(&s.experts) {
            conf.push(a.clamp(0.0, 1.0));
            ok.push(m == s.label);
        }
    }
    (conf, ok)
}

/// Assemble the full report for an evaluated model.
pub fn evaluation_report(
    eval: &Evaluation,
    data: &[LabeledSample],
    truth: Option<&[ConditionalPoint]>,
    budgets: &[f64],
    bins: usize,
) -> Result<EvalReport> {
    if eval.decisions.len() != data.len() {
        return Err(Error::InvalidInput(
            "evaluation and dataset lengths differ".into(),
        ));
    }
    if let Some(t) = truth {
        if t.len() != data.len() {
            return Err(Error::InvalidInput("ground truth length differs".into()));
        }
    }
    let labels: Vec<usize> = data.iter().map(|s| s.label).collect();
    let experts: Vec<Vec<usize>> = data.iter().map(|s| s.experts.clone()).collect();
    let error = system_error(&eval.decisions, &labels, &experts)?;
    let cov = coverage(&eval.decisions)?;
    let (conf, ok) = expert_calibration_pairs(&eval.estimates, data);
    let calib = ece(&conf, &ok, bins)?;
    let mut budgeted_errors = BTreeMap::new();
    for &b in budgets {
        let e = budgeted_error(&eval.decisions, &eval.estimates, &labels, &experts, b)?;
        budgeted_errors.insert(b.to_string(), e);
    }
    let true_acc: Option<Vec<f64>> =
        truth.map(|t| t.iter().flat_map(|c| c.p.iter().copied()).collect());
    let histogram = accuracy_histograms(&conf, true_acc.as_deref(), bins);
    Ok(EvalReport {
        error,
        coverage: cov,
        ece: calib,
        budgeted_errors,
        histogram,
    })
}
