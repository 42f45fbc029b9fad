//! Fixtures shared by the benchmarks.

use quantlim_core::mle::{self, QuantizedDataset};
use quantlim_core::synth::{self, GroupedLimits, LinearLimits};
use quantlim_core::{systems, ParameterPoint, SystemSpec};

/// Random grouped systems for the integer-limit benchmarks.
pub fn grouped_corpus(n: usize) -> Vec<SystemSpec> {
    let mut rng = synth::rng(11);
    (0..n)
        .map(|_| synth::grouped_system(&mut rng, GroupedLimits::default()).spec)
        .collect()
}

/// Random linear-Gaussian systems with their evaluation points.
pub fn linear_corpus(n: usize) -> Vec<(SystemSpec, ParameterPoint)> {
    let mut rng = synth::rng(12);
    (0..n)
        .map(|_| {
            let s = synth::linear_system(&mut rng, LinearLimits::default());
            let t = synth::uniform_point(&mut rng, s.dim_theta, -1.0, 1.0);
            (s, t)
        })
        .collect()
}

/// The scalar mean/variance design with a dataset of `n` snapshots at (0, 1).
pub fn interval_dataset(n: u64) -> (SystemSpec, QuantizedDataset) {
    let spec = systems::scalar_mean_var(-2.0, 2.0).expect("valid design");
    let data = mle::sample(&spec, &ParameterPoint(vec![0.0, 1.0]), n, 1).expect("sampling");
    (spec, data)
}
