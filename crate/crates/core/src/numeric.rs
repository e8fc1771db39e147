//! Stable scalar helpers shared by the estimators and the losses.

/// Logistic function, evaluated without overflow for any finite input.
#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)`.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Index of the largest entry; ties go to the smallest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let mx = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = values.iter().map(|&v| (v - mx).exp()).sum();
    mx + s.ln()
}

/// `ln Σ_{i != skip} e^{values[i]}`; requires at least two entries.
pub(crate) fn log_sum_exp_without(values: &[f64], skip: usize) -> f64 {
    let mx = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, &v)| (v - mx).exp())
        .sum();
    mx + s.ln()
}

/// Softmax with max-shift, written into `out`.
pub(crate) fn softmax_into(values: &[f64], out: &mut [f64]) {
    let mx = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, &v) in out.iter_mut().zip(values) {
        *o = (v - mx).exp();
        s += *o;
    }
    for o in out.iter_mut() {
        *o /= s;
    }
}

/// Softmax over all entries except `skip`, which receives 0.
pub(crate) fn softmax_without(values: &[f64], skip: usize) -> Vec<f64> {
    let mx = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == skip { 0.0 } else { (v - mx).exp() })
        .collect();
    let s: f64 = out.iter().sum();
    for o in &mut out {
        *o /= s;
    }
    out
}
