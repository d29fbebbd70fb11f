//! Stratified survival data with Weibull baselines, block AR(1) covariates
//! and uniform censoring, plus selection-quality metrics against a known
//! truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{validate_dataset, RawColumns, SurvivalDataset};
use crate::error::{Error, Result};

/// Cumulative baseline hazard H₀(t) = scale · t^shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weibull {
    pub shape: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselinePreset {
    /// Constant hazards, log-hazards evenly spaced over [0, 1].
    Auto,
    /// Shape 3, log-scales evenly spaced from −1 to −15.
    WeibullLadder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Baseline {
    Preset(BaselinePreset),
    Explicit(Vec<Weibull>),
}

impl Default for Baseline {
    fn default() -> Self {
        Baseline::Preset(BaselinePreset::Auto)
    }
}

fn evenly_spaced(from: f64, to: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![from];
    }
    (0..count)
        .map(|g| from + (to - from) * g as f64 / (count - 1) as f64)
        .collect()
}

impl Baseline {
    /// Per-stratum parameters for `num_strata` strata.
    pub fn resolve(&self, num_strata: usize) -> Result<Vec<Weibull>> {
        let params = match self {
            Baseline::Preset(BaselinePreset::Auto) => evenly_spaced(0.0, 1.0, num_strata)
                .into_iter()
                .map(|l| Weibull {
                    shape: 1.0,
                    scale: l.exp(),
                })
                .collect(),
            Baseline::Preset(BaselinePreset::WeibullLadder) => {
                evenly_spaced(-1.0, -15.0, num_strata)
                    .into_iter()
                    .map(|l| Weibull {
                        shape: 3.0,
                        scale: l.exp(),
                    })
                    .collect()
            }
            Baseline::Explicit(list) => {
                if list.len() != num_strata {
                    return Err(Error::InvalidParameter(format!(
                        "{} baseline entries for {num_strata} strata",
                        list.len()
                    )));
                }
                list.clone()
            }
        };
        for w in &params {
            if !(w.shape > 0.0 && w.scale > 0.0 && w.shape.is_finite() && w.scale.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "Weibull shape and scale must be positive, got {w:?}"
                )));
            }
        }
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CovStructure {
    #[default]
    Independent,
    /// AR(1) correlation ρ^|a−b| within consecutive blocks, independent
    /// across blocks. The last block may be short.
    ArBlock { block_size: usize, rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Censoring {
    #[default]
    None,
    /// C ~ Uniform(0, upper).
    Uniform { upper: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub true_beta: Vec<f64>,
    pub num_strata: usize,
    pub mean_stratum_size: usize,
    #[serde(default)]
    pub baseline: Baseline,
    #[serde(default)]
    pub cov_structure: CovStructure,
    #[serde(default)]
    pub censor: Censoring,
    /// Administrative truncation time; `None` means no truncation.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub normalized: bool,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.true_beta.is_empty() {
            return bad("true_beta is empty".into());
        }
        if self.true_beta.iter().any(|b| !b.is_finite()) {
            return bad("true_beta has non-finite entries".into());
        }
        if self.num_strata == 0 {
            return bad("num_strata must be at least 1".into());
        }
        if self.mean_stratum_size == 0 {
            return bad("mean_stratum_size must be at least 1".into());
        }
        if let CovStructure::ArBlock { block_size, rho } = self.cov_structure {
            if block_size == 0 {
                return bad("block_size must be at least 1".into());
            }
            if !(rho.abs() < 1.0) {
                return bad(format!("|rho| must be below 1, got {rho}"));
            }
        }
        if let Censoring::Uniform { upper } = self.censor {
            if !(upper > 0.0) {
                return bad(format!("censoring upper bound must be positive, got {upper}"));
            }
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0) {
                return bad(format!("tau must be positive, got {tau}"));
            }
        }
        self.baseline.resolve(self.num_strata)?;
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.true_beta.len()
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub dataset: SurvivalDataset,
    pub truth: Vec<f64>,
    pub latent_times: Vec<f64>,
    pub censoring_rate: f64,
    pub stratum_sizes: Vec<usize>,
}

fn draw_covariate_rows<R: Rng>(cov: &CovStructure, p: usize, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let (block, rho) = match *cov {
        CovStructure::Independent => (p.max(1), 0.0),
        CovStructure::ArBlock { block_size, rho } => (block_size, rho),
    };
    let innovation = (1.0 - rho * rho).sqrt();
    (0..n)
        .map(|_| {
            let mut row = Vec::with_capacity(p);
            for j in 0..p {
                let z: f64 = StandardNormal.sample(rng);
                let x = if j % block == 0 {
                    z
                } else {
                    rho * row[j - 1] + innovation * z
                };
                row.push(x);
            }
            row
        })
        .collect()
}

fn to_columns(rows: &[Vec<f64>], p: usize) -> Vec<Vec<f64>> {
    (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

fn zscore(columns: &mut [Vec<f64>]) {
    for col in columns {
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let sd = var.sqrt();
        for v in col.iter_mut() {
            *v -= mean;
            if sd > 0.0 {
                *v /= sd;
            }
        }
    }
}

/// n×p covariate matrix, returned column-major.
pub fn gen_covariates(config: &SimulationConfig, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = draw_covariate_rows(&config.cov_structure, config.p(), n, &mut rng);
    let mut columns = to_columns(&rows, config.p());
    if config.normalized {
        zscore(&mut columns);
    }
    Ok(columns)
}

/// Inverse-transform draw T = (−log U / (scale · exp(η)))^(1/shape).
pub fn weibull_event_time(u: f64, baseline: Weibull, eta: f64) -> f64 {
    (-u.ln() / (baseline.scale * eta.exp())).powf(1.0 / baseline.shape)
}

fn eta_of(beta: &[f64], columns: &[Vec<f64>], i: usize) -> f64 {
    beta.iter().zip(columns).map(|(b, c)| b * c[i]).sum()
}

/// Latent event times for covariates (column-major) and stratum ids.
pub fn gen_event_times(
    config: &SimulationConfig,
    covariates: &[Vec<f64>],
    strata: &[usize],
    seed: u64,
) -> Result<Vec<f64>> {
    config.validate()?;
    let baselines = config.baseline.resolve(config.num_strata)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    strata
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let b = *baselines.get(g).ok_or_else(|| {
                Error::InvalidParameter(format!("stratum id {g} out of range"))
            })?;
            let u: f64 = Open01.sample(&mut rng);
            Ok(weibull_event_time(u, b, eta_of(&config.true_beta, covariates, i)))
        })
        .collect()
}

fn censor_one(latent: f64, v: f64, censor: &Censoring, tau: Option<f64>) -> (f64, bool) {
    let c = match *censor {
        Censoring::None => f64::INFINITY,
        Censoring::Uniform { upper } => upper * v,
    };
    let limit = c.min(tau.unwrap_or(f64::INFINITY));
    if latent <= limit {
        (latent, true)
    } else {
        (limit, false)
    }
}

fn censoring_rate(status: &[i64]) -> f64 {
    status.iter().filter(|&&s| s == 0).count() as f64 / status.len() as f64
}

/// Observed time min(T*, C, τ) and status 1{T* ≤ min(C, τ)}.
pub fn apply_censoring(
    latent: &[f64],
    config: &SimulationConfig,
    seed: u64,
) -> Result<(Vec<f64>, Vec<i64>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (time, status): (Vec<f64>, Vec<i64>) = latent
        .iter()
        .map(|&t| {
            let v: f64 = Open01.sample(&mut rng);
            let (obs, event) = censor_one(t, v, &config.censor, config.tau);
            (obs, event as i64)
        })
        .unzip();
    if !status.iter().any(|&s| s == 1) {
        return Err(Error::AllCensored {
            rate: censoring_rate(&status),
        });
    }
    Ok((time, status))
}

fn stratum_rng(seed: u64, stratum: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stratum as u64 + 1);
    rng
}

/// Full dataset: Poisson stratum sizes from the master stream, then each
/// stratum's covariates, event times and censoring from its own stream.
pub fn simulate_survival_cox(config: &SimulationConfig, seed: u64) -> Result<SimulatedDataset> {
    config.validate()?;
    let p = config.p();
    let g_count = config.num_strata;
    let baselines = config.baseline.resolve(g_count)?;

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let poisson = Poisson::new(config.mean_stratum_size as f64)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let sizes: Vec<usize> = (0..g_count)
        .map(|_| (poisson.sample(&mut master) as usize).max(1))
        .collect();

    let mut rngs: Vec<ChaCha8Rng> = (0..g_count).map(|g| stratum_rng(seed, g)).collect();
    let mut rows = Vec::with_capacity(sizes.iter().sum());
    let mut strata = Vec::with_capacity(rows.capacity());
    for (g, (&size, rng)) in sizes.iter().zip(rngs.iter_mut()).enumerate() {
        rows.extend(draw_covariate_rows(&config.cov_structure, p, size, rng));
        strata.extend(std::iter::repeat_n(g, size));
    }
    let mut columns = to_columns(&rows, p);
    if config.normalized {
        zscore(&mut columns);
    }

    let n = strata.len();
    let mut latent = Vec::with_capacity(n);
    let mut time = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    let mut start = 0;
    for (g, (&size, rng)) in sizes.iter().zip(rngs.iter_mut()).enumerate() {
        let us: Vec<f64> = (0..size).map(|_| Open01.sample(rng)).collect();
        let vs: Vec<f64> = (0..size).map(|_| Open01.sample(rng)).collect();
        for (k, (u, v)) in us.into_iter().zip(vs).enumerate() {
            let i = start + k;
            let t = weibull_event_time(u, baselines[g], eta_of(&config.true_beta, &columns, i));
            let (obs, event) = censor_one(t, v, &config.censor, config.tau);
            latent.push(t);
            time.push(obs);
            status.push(event as i64);
        }
        start += size;
    }
    let rate = censoring_rate(&status);
    if !status.iter().any(|&s| s == 1) {
        return Err(Error::AllCensored { rate });
    }

    let dataset = validate_dataset(RawColumns {
        time,
        status,
        stratum: Some(strata.iter().map(|g| (g + 1).to_string()).collect()),
        covariates: columns,
        names: (1..=p).map(|j| format!("V{j}")).collect(),
    })?;
    Ok(SimulatedDataset {
        dataset,
        truth: config.true_beta.clone(),
        latent_times: latent,
        censoring_rate: rate,
        stratum_sizes: sizes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    pub selected: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub sensitivity: f64,
    pub specificity: f64,
    pub fdr: f64,
    /// Σ_j (β̂_j − β_j)².
    pub sse: f64,
}

/// Se = TP / signals, Sp = TN / nulls, FDR = FP / max(1, selected). An
/// empty signal (or null) set gives Se (or Sp) = 1.
pub fn selection_metrics(estimate: &[f64], truth: &[f64]) -> Result<SelectionMetrics> {
    if estimate.len() != truth.len() {
        return Err(Error::InvalidParameter(format!(
            "estimate has {} entries, truth has {}",
            estimate.len(),
            truth.len()
        )));
    }
    let (mut tp, mut fp, mut tn, mut signals) = (0, 0, 0, 0);
    let mut sse = 0.0;
    for (&b, &t) in estimate.iter().zip(truth) {
        let sel = b != 0.0;
        let sig = t != 0.0;
        signals += sig as usize;
        match (sel, sig) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => {}
        }
        sse += (b - t) * (b - t);
    }
    let nulls = truth.len() - signals;
    let ratio = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Ok(SelectionMetrics {
        selected: tp + fp,
        true_positives: tp,
        false_positives: fp,
        sensitivity: ratio(tp, signals),
        specificity: ratio(tn, nulls),
        fdr: fp as f64 / (tp + fp).max(1) as f64,
        sse,
    })
}
