//! Shared fixtures for the benchmarks.

use defer_lab_core::{sample_synthetic, ExpertSpec, LabeledSample, SyntheticSpec};

/// Three well-separated Gaussian classes in the plane with one expert that
/// is strong on the first two.
pub fn gaussian_task(n: usize, seed: u64) -> Vec<LabeledSample> {
    let spec = SyntheticSpec {
        k_classes: 3,
        feature_dim: 2,
        class_means: vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![1.5, 1.5 * 3f64.sqrt()]],
        sigma: 1.0,
        experts: vec![ExpertSpec { k: 2, p: 0.75 }],
        n,
        seed,
    };
    sample_synthetic(&spec).expect("valid spec").samples
}
