//! Per-iteration timing on synthetic data of a given size.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boosting::{Booster, ModelData};
use crate::data::{validate_dataset, RawColumns, SurvivalDataset};
use crate::error::Result;
use crate::simulate::{
    apply_censoring, gen_covariates, gen_event_times, Baseline, Censoring, CovStructure,
    SimulationConfig,
};

/// n subjects in one stratum, independent covariates, five signals of ±0.5,
/// uniform censoring on (0, 3).
pub fn synthetic_dataset(n: usize, p: usize, seed: u64) -> Result<SurvivalDataset> {
    let mut beta = vec![0.0; p];
    for (k, b) in beta.iter_mut().take(5).enumerate() {
        *b = if k % 2 == 0 { 0.5 } else { -0.5 };
    }
    let config = SimulationConfig {
        true_beta: beta,
        num_strata: 1,
        mean_stratum_size: n,
        baseline: Baseline::default(),
        cov_structure: CovStructure::Independent,
        censor: Censoring::Uniform { upper: 3.0 },
        tau: None,
        normalized: false,
    };
    let covariates = gen_covariates(&config, n, seed)?;
    let latent = gen_event_times(&config, &covariates, &vec![0; n], seed.wrapping_add(1))?;
    let (time, status) = apply_censoring(&latent, &config, seed.wrapping_add(2))?;
    validate_dataset(RawColumns {
        time,
        status,
        stratum: None,
        covariates,
        names: (1..=p).map(|j| format!("V{j}")).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub n: usize,
    pub p: usize,
    pub iterations: usize,
    pub seconds_per_iteration: f64,
}

/// Best-of-`repeats` mean wall time per boosting iteration.
pub fn time_iterations(
    data: &SurvivalDataset,
    iterations: usize,
    repeats: usize,
) -> Result<Timing> {
    let model = ModelData::new(data);
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let mut booster = Booster::new(&model, 0.01)?;
        let start = Instant::now();
        for _ in 0..iterations {
            booster.step()?;
        }
        best = best.min(start.elapsed().as_secs_f64() / iterations as f64);
    }
    Ok(Timing {
        n: data.n(),
        p: data.p(),
        iterations,
        seconds_per_iteration: best,
    })
}
