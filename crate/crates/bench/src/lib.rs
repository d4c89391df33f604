//! Shared fixtures for the solver benchmarks.

use std::sync::Arc;

use spca_core::models::{build_spiked_general, sample_gaussian, Dataset, PlantedInstance, SpikeSupport};

/// A spiked instance with `gamma = 0.2` and `n` samples drawn from it.
pub fn spiked_fixture(d: usize, s: usize, n: usize, seed: u64) -> (PlantedInstance, Arc<Dataset>) {
    let inst = build_spiked_general(d, s, 0.2, &SpikeSupport::Random { seed }).expect("spiked instance");
    let data = sample_gaussian(&inst.sigma, n, seed).expect("sample");
    (inst, Arc::new(data))
}
