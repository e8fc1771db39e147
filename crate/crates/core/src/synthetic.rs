//! Gaussian-mixture tasks with simulated experts and closed-form ground
//! truth.
//!
//! Classes have uniform priors and isotropic Gaussian features with a shared
//! variance, so `η(x)` is a softmax of negative scaled squared distances.
//! Expert `j` answers correctly with probability `p_j` on labels below
//! `k_j` (choosing uniformly among the wrong labels otherwise) and uniformly
//! at random on the remaining labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::softmax_into;
use crate::oracle::{bayes_decision, pointwise_risk, ConditionalPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertSpec {
    /// Number of leading labels the expert is "strong" on.
    pub k: usize,
    /// Accuracy on the strong labels.
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub k_classes: usize,
    pub feature_dim: usize,
    pub class_means: Vec<Vec<f64>>,
    pub sigma: f64,
    pub experts: Vec<ExpertSpec>,
    pub n: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.k_classes < 2 {
            return bad(format!("k_classes must be >= 2, got {}", self.k_classes));
        }
        if self.feature_dim == 0 {
            return bad("feature_dim must be >= 1".into());
        }
        if self.class_means.len() != self.k_classes {
            return bad(format!(
                "{} class means for {} classes",
                self.class_means.len(),
                self.k_classes
            ));
        }
        if let Some(i) = self
            .class_means
            .iter()
            .position(|mu| mu.len() != self.feature_dim || mu.iter().any(|v| !v.is_finite()))
        {
            return bad(format!(
                "class mean {i} must have {} finite entries",
                self.feature_dim
            ));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.experts.is_empty() {
            return bad("at least one expert is required".into());
        }
        for (j, e) in self.experts.iter().enumerate() {
            if e.k < 1 || e.k > self.k_classes {
                return bad(format!("expert {j}: k must lie in 1..={}", self.k_classes));
            }
            if !(0.0..=1.0).contains(&e.p) {
                return bad(format!("expert {j}: p must lie in [0, 1]"));
            }
        }
        if self.n == 0 {
            return bad("n must be >= 1".into());
        }
        Ok(())
    }

    /// Probability that expert `j` is correct given the true label.
    pub fn expert_accuracy_on(&self, j: usize, label: usize) -> f64 {
        let e = &self.experts[j];
        if label < e.k {
            e.p
        } else {
            1.0 / self.k_classes as f64
        }
    }

    /// Class posterior at `x`.
    pub fn posterior(&self, x: &[f64]) -> Vec<f64> {
        let scale = 2.0 * self.sigma * self.sigma;
        let logits: Vec<f64> = self
            .class_means
            .iter()
            .map(|mu| {
                -mu.iter()
                    .zip(x)
                    .map(|(m, xi)| (xi - m) * (xi - m))
                    .sum::<f64>()
                    / scale
            })
            .collect();
        let mut eta = vec![0.0; self.k_classes];
        softmax_into(&logits, &mut eta);
        eta
    }

    /// Ground truth `(η(x), Pr(M_j = Y | x))` at `x`.
    pub fn truth_at(&self, x: &[f64]) -> ConditionalPoint {
        let eta = self.posterior(x);
        let p = (0..self.experts.len())
            .map(|j| {
                // expert accuracy is constant when it is strong on every label
                if self.experts[j].k == self.k_classes {
                    return self.experts[j].p;
                }
                eta.iter()
                    .enumerate()
                    .map(|(y, e)| e * self.expert_accuracy_on(j, y))
                    .sum::<f64>()
                    .clamp(0.0, 1.0)
            })
            .collect();
        ConditionalPoint { eta, p }
    }
}

/// One observation: features, true label, and one prediction per expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: usize,
    pub experts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub samples: Vec<LabeledSample>,
    pub truth: Vec<ConditionalPoint>,
    /// Mean pointwise risk of the Bayes-optimal decision over the sample.
    pub bayes_risk: f64,
}

/// Draw `spec.n` samples. Output is a pure function of `spec`.
pub fn sample_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.k_classes;
    let mut samples = Vec::with_capacity(spec.n);
    let mut truth = Vec::with_capacity(spec.n);
    let mut risk_sum = 0.0;
    for _ in 0..spec.n {
        let label = rng.random_range(0..k);
        let features: Vec<f64> = spec.class_means[label]
            .iter()
            .map(|&mu| {
                let z: f64 = StandardNormal.sample(&mut rng);
                mu + spec.sigma * z
            })
            .collect();
        let experts = spec
            .experts
            .iter()
            .map(|e| {
                if label < e.k {
                    if rng.random_bool(e.p) {
                        label
                    } else {
                        // uniform over the K-1 wrong labels
                        let r = rng.random_range(0..k - 1);
                        if r >= label {
                            r + 1
                        } else {
                            r
                        }
                    }
                } else {
                    rng.random_range(0..k)
                }
            })
            .collect();
        let point = spec.truth_at(&features);
        risk_sum += pointwise_risk(bayes_decision(&point), &point);
        samples.push(LabeledSample {
            features,
            label,
            experts,
        });
        truth.push(point);
    }
    Ok(SyntheticData {
        samples,
        truth,
        bayes_risk: risk_sum / spec.n as f64,
    })
}
