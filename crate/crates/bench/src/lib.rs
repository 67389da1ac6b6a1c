//! Shared fixtures for the benchmarks.

use pfst_core::incremental::ScatterContext;
use pfst_core::synth::{generate, SyntheticSpec};
use pfst_core::{Dataset, DEFAULT_SINGULAR_TOL};

/// Standardized synthetic instance with five planted informative features.
pub fn instance(n: usize, p: usize) -> Dataset {
    let spec = SyntheticSpec {
        n,
        p,
        ..SyntheticSpec::default()
    };
    let data = generate(&spec).expect("valid synthetic spec").data;
    pfst_core::io::standardize(&data).0
}

pub fn context(data: &Dataset) -> ScatterContext {
    ScatterContext::from_dataset(data, DEFAULT_SINGULAR_TOL).expect("well-conditioned instance")
}
