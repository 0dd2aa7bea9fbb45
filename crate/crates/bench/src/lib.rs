//! Shared inputs for the benchmarks.

use kamtori_core::model::ModelHamiltonian;
use kamtori_core::scenarios::{builtin, random_perturbation, Scenario};
use kamtori_core::{FtSeries, NormWeights};

pub fn scenario(name: &str) -> Scenario {
    builtin(name).expect("builtin scenario")
}

/// Random real series of unit norm at `(0.5, 0.1)`.
pub fn series(sc: &Scenario, k_max: u32, seed: u64) -> FtSeries {
    let w = NormWeights::new(0.5, 0.1).unwrap();
    random_perturbation(sc.dims, k_max, 2, 1.0, w, seed)
}

/// The scenario at the golden-mean parameter with its own perturbation.
pub fn model(sc: &Scenario) -> ModelHamiltonian {
    let lambda = vec![1.618034; sc.chart.n0];
    sc.model_at(&lambda, &sc.local_perturbation()).expect("model")
}
