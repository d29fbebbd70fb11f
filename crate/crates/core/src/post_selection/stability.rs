use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boosting::{run_boosting, BoostingConfig};
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::stopping::StoppingRule;

pub const DEFAULT_SUBSAMPLES: usize = 50;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
const SUBSAMPLE_ATTEMPTS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub subsamples: usize,
    pub threshold: f64,
    pub variables: Vec<String>,
    /// Fraction of subsample fits in which each variable was selected.
    pub frequencies: Vec<f64>,
    /// Indices with frequency ≥ threshold.
    pub stable: Vec<usize>,
}

impl StabilityResult {
    /// Stable set for a different threshold.
    pub fn stable_at(&self, threshold: f64) -> Vec<usize> {
        self.frequencies
            .iter()
            .enumerate()
            .filter(|(_, &f)| f >= threshold)
            .map(|(j, _)| j)
            .collect()
    }
}

/// ⌊n/2⌋ subjects drawn without replacement, ⌊n_g/2⌋ from each stratum and
/// the remainder spread over odd-sized strata. Returned in ascending order.
pub fn half_subsample(data: &SurvivalDataset, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let members = data.stratum_members();
    let mut take: Vec<usize> = members.iter().map(|m| m.len() / 2).collect();
    let mut odd: Vec<usize> = (0..members.len()).filter(|&g| members[g].len() % 2 == 1).collect();
    odd.shuffle(rng);
    let remainder = data.n() / 2 - take.iter().sum::<usize>();
    for &g in odd.iter().take(remainder) {
        take[g] += 1;
    }
    let mut out = Vec::with_capacity(data.n() / 2);
    for (mut m, k) in members.into_iter().zip(take) {
        m.shuffle(rng);
        out.extend_from_slice(&m[..k]);
    }
    out.sort_unstable();
    out
}

fn subsample_with_events(
    data: &SurvivalDataset,
    seed: u64,
    b: usize,
) -> Result<SurvivalDataset> {
    for attempt in 0..SUBSAMPLE_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64 * SUBSAMPLE_ATTEMPTS + attempt);
        let idx = half_subsample(data, &mut rng);
        if idx.is_empty() {
            break;
        }
        if let Ok(sub) = data.subset(&idx) {
            return Ok(sub);
        }
    }
    Err(Error::InfeasibleSubsample(format!(
        "subsample {b} has no events after {SUBSAMPLE_ATTEMPTS} draws"
    )))
}

/// Fits `rule` on `subsamples` stratified half-samples and keeps variables
/// selected in at least `threshold` of them.
pub fn stability_selection(
    data: &SurvivalDataset,
    config: &BoostingConfig,
    rule: &StoppingRule,
    subsamples: usize,
    threshold: f64,
    seed: u64,
) -> Result<StabilityResult> {
    if subsamples == 0 {
        return Err(Error::InvalidParameter("subsamples must be at least 1".into()));
    }
    if !threshold.is_finite() {
        return Err(Error::InvalidParameter(format!("threshold must be finite, got {threshold}")));
    }
    config.validate()?;
    rule.validate(data.p())?;

    let selections = (0..subsamples)
        .into_par_iter()
        .map(|b| {
            let sub = subsample_with_events(data, seed, b)?;
            Ok(run_boosting(&sub, config, rule)?.selected)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut counts = vec![0usize; data.p()];
    for selected in &selections {
        for &j in selected {
            counts[j] += 1;
        }
    }
    let frequencies: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / subsamples as f64)
        .collect();
    let mut result = StabilityResult {
        subsamples,
        threshold,
        variables: data.names().to_vec(),
        frequencies,
        stable: Vec::new(),
    };
    result.stable = result.stable_at(threshold);
    Ok(result)
}
