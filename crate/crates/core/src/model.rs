//! Scorer models mapping features to `K + M` scores.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ScoreVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "arch", rename_all = "snake_case", deny_unknown_fields)]
pub enum Architecture {
    Linear,
    /// One hidden rectifier layer of width `hidden`.
    Mlp {
        hidden: usize,
    },
}

/// Affine layer; `weights` is row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn init(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.inputs).zip(&self.bias))
        {
            *o = b + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
        }
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerModel {
    pub architecture: Architecture,
    pub input_dim: usize,
    pub k_classes: usize,
    pub n_experts: usize,
    pub layers: Vec<Dense>,
}

/// Intermediate activations kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace {
    hidden: Option<Vec<f64>>,
    pub output: Vec<f64>,
}

impl ScorerModel {
    /// Fan-in scaled uniform weights, zero biases.
    pub fn init(arch: Architecture, d: usize, k: usize, m: usize, seed: u64) -> Result<Self> {
        if d == 0 || m == 0 {
            return Err(Error::InvalidDimension(
                "input dimension and expert count must be positive".into(),
            ));
        }
        if k < 2 {
            return Err(Error::InvalidDimension(format!(
                "class count must be at least 2, got {k}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = k + m;
        let layers = match arch {
            Architecture::Linear => vec![Dense::init(d, out, &mut rng)],
            Architecture::Mlp { hidden } => {
                if hidden == 0 {
                    return Err(Error::InvalidDimension(
                        "hidden width must be positive".into(),
                    ));
                }
                vec![
                    Dense::init(d, hidden, &mut rng),
                    Dense::init(hidden, out, &mut rng),
                ]
            }
        };
        Ok(Self {
            architecture: arch,
            input_dim: d,
            k_classes: k,
            n_experts: m,
            layers,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.k_classes + self.n_experts
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Parameters flattened layer by layer (weights, then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::InvalidDimension(format!(
                "{} parameters for a model with {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::InvalidInput(format!(
                "feature vector has {} entries, model expects {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ScoreVector> {
        let trace = self.trace(x)?;
        ScoreVector::new(trace.output, self.k_classes, self.n_experts)
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut output = vec![0.0; self.output_dim()];
        match self.layers.as_slice() {
            [only] => {
                only.apply(x, &mut output);
                Ok(Trace {
                    hidden: None,
                    output,
                })
            }
            [first, second] => {
                let mut h = vec![0.0; first.outputs];
                first.apply(x, &mut h);
                for v in &mut h {
                    *v = v.max(0.0);
                }
                second.apply(&h, &mut output);
                Ok(Trace {
                    hidden: Some(h),
                    output,
                })
            }
            _ => Err(Error::InvalidDimension("unsupported layer stack".into())),
        }
    }

    /// Accumulate `∂(dout · g(x)) / ∂θ` into `grad` (flat layout).
    pub fn backprop(&self, x: &[f64], trace: &Trace, dout: &[f64], grad: &mut [f64]) {
        match (self.layers.as_slice(), &trace.hidden) {
            ([only], None) => dense_backward(only, x, dout, grad, None),
            ([first, second], Some(h)) => {
                let off = first.param_count();
                let (g_first, g_second) = grad.split_at_mut(off);
                let mut dh = vec![0.0; first.outputs];
                dense_backward(second, h, dout, g_second, Some(&mut dh));
                for (d, &hv) in dh.iter_mut().zip(h) {
                    if hv <= 0.0 {
                        *d = 0.0;
                    }
                }
                dense_backward(first, x, &dh, g_first, None);
            }
            _ => unreachable!("trace does not match the layer stack"),
        }
    }
}

fn dense_backward(
    layer: &Dense,
    input: &[f64],
    dout: &[f64],
    grad: &mut [f64],
    dinput: Option<&mut [f64]>,
) {
    let nw = layer.weights.len();
    let (gw, gb) = grad.split_at_mut(nw);
    for (o, &d) in dout.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        gb[o] += d;
        for (g, &xi) in gw[o * layer.inputs..(o + 1) * layer.inputs]
            .iter_mut()
            .zip(input)
        {
            *g += d * xi;
        }
    }
    if let Some(di) = dinput {
        for (o, &d) in dout.iter().enumerate() {
            let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (dv, w) in di.iter_mut().zip(row) {
                *dv += d * w;
            }
        }
    }
}
