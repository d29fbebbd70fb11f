//! Stopping rules: fixed count, target support size, likelihood change,
//! information criteria (BIC, EBIC, AIC) and k-fold cross validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::boosting::{
    run_sequential, Booster, BoostingConfig, BoostingFit, ModelData, StopReason,
};
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::likelihood::RiskWeights;

pub const DEFAULT_ITERATIONS: usize = 500;
pub const DEFAULT_ALPHA: f64 = 0.001;
pub const DEFAULT_FOLDS: usize = 10;

/// Reassignment attempts before a fold layout is declared infeasible.
const FOLD_ATTEMPTS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StoppingRule {
    Fixed {
        iterations: usize,
    },
    NumSelected {
        target: usize,
    },
    LikelihoodChange {
        alpha: f64,
    },
    Bic,
    Ebic {
        gamma: f64,
    },
    Aic,
    CrossValidation {
        folds: usize,
        max_iterations: usize,
        seed: u64,
    },
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule::Fixed {
            iterations: DEFAULT_ITERATIONS,
        }
    }
}

impl StoppingRule {
    pub fn validate(&self, p: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match *self {
            StoppingRule::Fixed { .. } | StoppingRule::Bic | StoppingRule::Aic => Ok(()),
            StoppingRule::NumSelected { target } => {
                if target == 0 || target > p {
                    bad(format!("target must be in 1..={p}, got {target}"))
                } else {
                    Ok(())
                }
            }
            StoppingRule::LikelihoodChange { alpha } => {
                if alpha.is_finite() && alpha > 0.0 {
                    Ok(())
                } else {
                    bad(format!("alpha must be positive, got {alpha}"))
                }
            }
            StoppingRule::Ebic { gamma } => {
                if (0.0..=1.0).contains(&gamma) {
                    Ok(())
                } else {
                    bad(format!("gamma must lie in [0, 1], got {gamma}"))
                }
            }
            StoppingRule::CrossValidation {
                folds,
                max_iterations,
                ..
            } => {
                if folds < 2 {
                    bad(format!("folds must be at least 2, got {folds}"))
                } else if max_iterations == 0 {
                    bad("cross-validation max_iterations must be at least 1".into())
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn criterion(&self) -> Option<Criterion> {
        match *self {
            StoppingRule::Bic => Some(Criterion::Bic),
            StoppingRule::Ebic { gamma } => Some(Criterion::Ebic { gamma }),
            StoppingRule::Aic => Some(Criterion::Aic),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StoppingRule::Fixed { .. } => "fixed",
            StoppingRule::NumSelected { .. } => "num_selected",
            StoppingRule::LikelihoodChange { .. } => "likelihood_change",
            StoppingRule::Bic => "bic",
            StoppingRule::Ebic { .. } => "ebic",
            StoppingRule::Aic => "aic",
            StoppingRule::CrossValidation { .. } => "cross_validation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum Criterion {
    Bic,
    Ebic { gamma: f64 },
    Aic,
}

/// BIC against the empty model: −2{ℓ_j − ℓ_0} + p_j·log d.
pub fn bic(log_likelihood: f64, null_log_likelihood: f64, selected: usize, events: usize) -> f64 {
    -2.0 * (log_likelihood - null_log_likelihood) + selected as f64 * (events as f64).ln()
}

/// −2ℓ_j + p_j·log d + 2γ·log C(p, p_j).
pub fn ebic(log_likelihood: f64, selected: usize, p: usize, events: usize, gamma: f64) -> f64 {
    -2.0 * log_likelihood
        + selected as f64 * (events as f64).ln()
        + 2.0 * gamma * log_binomial(p, selected)
}

/// −2ℓ_j + 2p_j.
pub fn aic(log_likelihood: f64, selected: usize) -> f64 {
    -2.0 * log_likelihood + 2.0 * selected as f64
}

/// log C(n, k) through log-gamma.
pub fn log_binomial(n: usize, k: usize) -> f64 {
    assert!(k <= n, "log_binomial: k = {k} exceeds n = {n}");
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// True when the gain ℓ(β(m+1)) − ℓ(β(m)) is strictly below `alpha`.
pub fn likelihood_change_stop(previous: f64, current: f64, alpha: f64) -> bool {
    -(previous - current) < alpha
}

/// Index of the smallest value, first occurrence on ties.
pub fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (m, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = m;
        }
    }
    best
}

impl Criterion {
    pub fn evaluate(
        &self,
        log_likelihood: f64,
        null_log_likelihood: f64,
        selected: usize,
        p: usize,
        events: usize,
    ) -> f64 {
        match *self {
            Criterion::Bic => bic(log_likelihood, null_log_likelihood, selected, events),
            Criterion::Ebic { gamma } => ebic(log_likelihood, selected, p, events, gamma),
            Criterion::Aic => aic(log_likelihood, selected),
        }
    }
}

/// Criterion value after each iteration m = 0..=M and its first argmin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionHistory {
    pub criterion: Criterion,
    pub values: Vec<f64>,
    pub best: usize,
}

/// Runs to `config.max_iterations`, then keeps the iteration minimising the
/// criterion.
pub fn criterion_minimizing_run(
    data: &SurvivalDataset,
    config: &BoostingConfig,
    criterion: Criterion,
) -> Result<BoostingFit> {
    config.validate()?;
    let model = ModelData::new(data);
    let mut booster = Booster::new(&model, config.rate)?;
    let null = booster.log_likelihood();
    let (p, d) = (model.p(), model.events());
    let mut values = Vec::with_capacity(config.max_iterations + 1);
    values.push(criterion.evaluate(null, null, 0, p, d));
    for _ in 0..config.max_iterations {
        let rec = booster.step()?;
        values.push(criterion.evaluate(rec.log_likelihood, null, booster.support_size(), p, d));
    }
    let best = argmin_first(&values);
    let rule = match criterion {
        Criterion::Bic => StoppingRule::Bic,
        Criterion::Ebic { gamma } => StoppingRule::Ebic { gamma },
        Criterion::Aic => StoppingRule::Aic,
    };
    let mut fit = BoostingFit::from_trace(
        booster.trace(),
        best,
        config.rate,
        rule,
        StopReason::CriterionMinimum,
    );
    fit.boundary = best == config.max_iterations;
    fit.criterion = Some(CriterionHistory {
        criterion,
        values,
        best,
    });
    Ok(fit)
}

/// Per-fold scores CV_k(m) for m = 0..=max_iterations and the chosen m*.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidationResult {
    pub folds: usize,
    pub seed: u64,
    /// Fold id of every subject.
    pub assignment: Vec<usize>,
    /// `fold_scores[k][m]` = CV_k(m).
    pub fold_scores: Vec<Vec<f64>>,
    /// Σ_k CV_k(m).
    pub total: Vec<f64>,
    pub best: usize,
    pub boundary: bool,
}

/// Seeded fold labels, stratified by stratum. Within each stratum events
/// are dealt first, so every fold receives events whenever d ≥ folds.
pub fn fold_assignment(data: &SurvivalDataset, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("folds must be at least 2, got {folds}")));
    }
    if data.n() < folds {
        return Err(Error::InfeasibleFolds(format!(
            "{} subjects cannot fill {folds} folds",
            data.n()
        )));
    }
    for attempt in 0..FOLD_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt);
        let mut assignment = vec![0; data.n()];
        let mut next = 0usize;
        for members in data.stratum_members() {
            let (mut events, mut censored): (Vec<usize>, Vec<usize>) =
                members.into_iter().partition(|&i| data.status()[i]);
            events.shuffle(&mut rng);
            censored.shuffle(&mut rng);
            for i in events.into_iter().chain(censored) {
                assignment[i] = next % folds;
                next += 1;
            }
        }
        if folds_feasible(data, &assignment, folds) {
            return Ok(assignment);
        }
    }
    Err(Error::InfeasibleFolds(format!(
        "could not give each of {folds} folds an event on both sides ({} events)",
        data.num_events()
    )))
}

fn folds_feasible(data: &SurvivalDataset, assignment: &[usize], folds: usize) -> bool {
    let mut held = vec![0usize; folds];
    for (i, &f) in assignment.iter().enumerate() {
        if data.status()[i] {
            held[f] += 1;
        }
    }
    let d = data.num_events();
    held.iter().all(|&e| e > 0 && e < d)
}

/// Training and held-out subject ids of fold `k`.
pub fn fold_split(assignment: &[usize], k: usize) -> (Vec<usize>, Vec<usize>) {
    (0..assignment.len()).partition(|&i| assignment[i] != k)
}

/// CV_k(m) = −[ℓ(β_{−k}(m)) − ℓ_{−k}(β_{−k}(m))] for m = 0..=max_iterations.
pub fn fold_scores(
    full: &ModelData,
    training: &SurvivalDataset,
    rate: f64,
    max_iterations: usize,
) -> Result<Vec<f64>> {
    let model = ModelData::new(training);
    let mut booster = Booster::new(&model, rate)?;
    let mut eta_full = vec![0.0; full.n()];
    let full_ll = |eta: &[f64]| -> Result<f64> {
        Ok(RiskWeights::compute(full.index(), eta)?.log_likelihood())
    };
    let mut scores = Vec::with_capacity(max_iterations + 1);
    scores.push(-(full_ll(&eta_full)? - booster.log_likelihood()));
    for _ in 0..max_iterations {
        let rec = booster.step()?;
        full.design().update_eta(&mut eta_full, rec.variable, rec.delta);
        scores.push(-(full_ll(&eta_full)? - rec.log_likelihood));
    }
    Ok(scores)
}

/// k-fold cross validation of the iteration count followed by a full-data
/// refit at the chosen m*.
pub fn cross_validate(
    data: &SurvivalDataset,
    config: &BoostingConfig,
    folds: usize,
    max_iterations: usize,
    seed: u64,
) -> Result<(CrossValidationResult, BoostingFit)> {
    config.validate()?;
    let rule = StoppingRule::CrossValidation {
        folds,
        max_iterations,
        seed,
    };
    rule.validate(data.p())?;
    let assignment = fold_assignment(data, folds, seed)?;
    let full = ModelData::new(data);

    let fold_scores = (0..folds)
        .into_par_iter()
        .map(|k| {
            let (train, _) = fold_split(&assignment, k);
            let training = data.subset(&train).map_err(|_| {
                Error::InfeasibleFolds(format!("training data for fold {k} has no events"))
            })?;
            fold_scores(&full, &training, config.rate, max_iterations)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total = vec![0.0; max_iterations + 1];
    for scores in &fold_scores {
        for (t, s) in total.iter_mut().zip(scores) {
            *t += s;
        }
    }
    let best = argmin_first(&total);
    let result = CrossValidationResult {
        folds,
        seed,
        assignment,
        fold_scores,
        total,
        best,
        boundary: best == max_iterations,
    };

    let refit_config = BoostingConfig::new(config.rate, config.max_iterations.max(best).max(1));
    let mut fit = run_sequential(&full, &refit_config, &StoppingRule::Fixed { iterations: best })?;
    fit.rule = rule;
    fit.stop_reason = StopReason::CrossValidationMinimum;
    fit.boundary = result.boundary;
    fit.cross_validation = Some(result.clone());
    Ok((result, fit))
}
