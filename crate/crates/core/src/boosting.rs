//! Componentwise gradient boosting for the stratified partial likelihood.
//!
//! Each iteration scans L1(j) for every variable, picks the largest in
//! absolute value (smallest index on ties), and moves that single
//! coefficient by `rate · L1 / L2`.

use serde::{Deserialize, Serialize};

use crate::data::{build_stratum_index, StratumIndex, SurvivalDataset};
use crate::error::{Error, Result};
use crate::likelihood::{RiskWeights, SortedDesign};
use crate::stopping::{self, CriterionHistory, CrossValidationResult, StoppingRule};

/// Curvature below this is treated as a flat coordinate.
pub const MIN_CURVATURE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostingConfig {
    /// Step size υ.
    pub rate: f64,
    /// Iteration cap M for rules that stop on their own.
    pub max_iterations: usize,
}

impl Default for BoostingConfig {
    fn default() -> Self {
        BoostingConfig {
            rate: 0.01,
            max_iterations: 500,
        }
    }
}

impl BoostingConfig {
    pub fn new(rate: f64, max_iterations: usize) -> Self {
        BoostingConfig {
            rate,
            max_iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rate must be positive, got {}",
                self.rate
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything the loop needs from a dataset, built once.
#[derive(Debug, Clone)]
pub struct ModelData {
    index: StratumIndex,
    design: SortedDesign,
    events: usize,
}

impl ModelData {
    pub fn new(data: &SurvivalDataset) -> Self {
        let index = build_stratum_index(data);
        let design = SortedDesign::new(data, &index);
        ModelData {
            index,
            design,
            events: data.num_events(),
        }
    }

    pub fn index(&self) -> &StratumIndex {
        &self.index
    }

    pub fn design(&self) -> &SortedDesign {
        &self.design
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn p(&self) -> usize {
        self.design.p()
    }

    pub fn events(&self) -> usize {
        self.events
    }
}

/// One boosting update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    pub variable: usize,
    /// L1 of the selected variable before the update.
    pub score: f64,
    /// L2 of the selected variable before the update.
    pub curvature: f64,
    pub delta: f64,
    /// Coefficient of `variable` after the update.
    pub coefficient: f64,
    /// Log partial likelihood after the update.
    pub log_likelihood: f64,
    /// False when the update lowered the likelihood.
    pub ascent: bool,
}

/// Sparse record of a run: each step changes exactly one coefficient, so
/// the step list is also the coefficient path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostingTrace {
    pub num_variables: usize,
    pub initial_log_likelihood: f64,
    pub steps: Vec<StepRecord>,
}

impl BoostingTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// ℓ(β(m)) for m = 0..=len.
    pub fn log_likelihoods(&self) -> Vec<f64> {
        std::iter::once(self.initial_log_likelihood)
            .chain(self.steps.iter().map(|s| s.log_likelihood))
            .collect()
    }

    /// Coefficients after `m` iterations.
    pub fn beta_at(&self, m: usize) -> Vec<f64> {
        let mut beta = vec![0.0; self.num_variables];
        for s in &self.steps[..m.min(self.steps.len())] {
            beta[s.variable] = s.coefficient;
        }
        beta
    }

    /// Support size |{j: β_j ≠ 0}| for m = 0..=len.
    pub fn support_sizes(&self) -> Vec<usize> {
        let mut beta = vec![0.0; self.num_variables];
        let mut size = 0usize;
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(0);
        for s in &self.steps {
            let old = beta[s.variable];
            beta[s.variable] = s.coefficient;
            match (old != 0.0, s.coefficient != 0.0) {
                (false, true) => size += 1,
                (true, false) => size -= 1,
                _ => {}
            }
            out.push(size);
        }
        out
    }

    pub fn truncated(&self, m: usize) -> BoostingTrace {
        BoostingTrace {
            num_variables: self.num_variables,
            initial_log_likelihood: self.initial_log_likelihood,
            steps: self.steps[..m.min(self.steps.len())].to_vec(),
        }
    }
}

/// How many times each variable was chosen, and when first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFrequency {
    pub counts: Vec<usize>,
    pub first_selected: Vec<Option<usize>>,
}

pub fn selection_frequency(trace: &BoostingTrace) -> SelectionFrequency {
    let mut counts = vec![0; trace.num_variables];
    let mut first_selected = vec![None; trace.num_variables];
    for s in &trace.steps {
        counts[s.variable] += 1;
        first_selected[s.variable].get_or_insert(s.iteration);
    }
    SelectionFrequency {
        counts,
        first_selected,
    }
}

/// Per-variable `(iteration, value)` breakpoints; the value holds until the
/// next breakpoint and is zero before the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPath {
    pub breakpoints: Vec<Vec<(usize, f64)>>,
}

impl CoefficientPath {
    pub fn value_at(&self, variable: usize, m: usize) -> f64 {
        self.breakpoints[variable]
            .iter()
            .take_while(|(it, _)| *it <= m)
            .last()
            .map_or(0.0, |&(_, v)| v)
    }
}

pub fn coefficient_path(trace: &BoostingTrace) -> CoefficientPath {
    let mut breakpoints = vec![Vec::new(); trace.num_variables];
    for s in &trace.steps {
        breakpoints[s.variable].push((s.iteration, s.coefficient));
    }
    CoefficientPath { breakpoints }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Ran the fixed number of iterations.
    Completed,
    TargetReached,
    LikelihoodConverged,
    /// Hit the iteration cap before the rule's own condition.
    IterationCap,
    CriterionMinimum,
    CrossValidationMinimum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostingFit {
    pub beta: Vec<f64>,
    pub selected: Vec<usize>,
    pub iterations_run: usize,
    pub rate: f64,
    pub rule: StoppingRule,
    pub stop_reason: StopReason,
    /// The chosen stopping point sits on the iteration cap.
    pub boundary: bool,
    pub log_likelihood: f64,
    pub trace: BoostingTrace,
    pub criterion: Option<CriterionHistory>,
    pub cross_validation: Option<CrossValidationResult>,
}

impl BoostingFit {
    /// Fit reconstructed from the first `m` steps of `trace`.
    pub(crate) fn from_trace(
        trace: &BoostingTrace,
        m: usize,
        rate: f64,
        rule: StoppingRule,
        stop_reason: StopReason,
    ) -> Self {
        let trace = trace.truncated(m);
        let beta = trace.beta_at(m);
        let log_likelihood = trace
            .steps
            .last()
            .map_or(trace.initial_log_likelihood, |s| s.log_likelihood);
        BoostingFit {
            selected: support(&beta),
            iterations_run: trace.len(),
            beta,
            rate,
            rule,
            stop_reason,
            boundary: false,
            log_likelihood,
            trace,
            criterion: None,
            cross_validation: None,
        }
    }
}

pub fn support(beta: &[f64]) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, &b)| b != 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// Boosting state machine: β, the sorted linear predictor, and the risk-set
/// weights for the current η.
pub struct Booster<'a> {
    model: &'a ModelData,
    rate: f64,
    beta: Vec<f64>,
    eta: Vec<f64>,
    weights: RiskWeights,
    scores: Vec<f64>,
    support_size: usize,
    trace: BoostingTrace,
}

impl<'a> Booster<'a> {
    /// Starts from β = 0.
    pub fn new(model: &'a ModelData, rate: f64) -> Result<Self> {
        if model.p() == 0 {
            return Err(Error::InvalidParameter("dataset has no covariates".into()));
        }
        let eta = vec![0.0; model.n()];
        let weights = RiskWeights::compute(model.index(), &eta)?;
        let trace = BoostingTrace {
            num_variables: model.p(),
            initial_log_likelihood: weights.log_likelihood(),
            steps: Vec::new(),
        };
        Ok(Booster {
            model,
            rate,
            beta: vec![0.0; model.p()],
            eta,
            weights,
            scores: vec![0.0; model.p()],
            support_size: 0,
            trace,
        })
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn log_likelihood(&self) -> f64 {
        self.weights.log_likelihood()
    }

    pub fn support_size(&self) -> usize {
        self.support_size
    }

    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn trace(&self) -> &BoostingTrace {
        &self.trace
    }

    pub fn into_trace(self) -> BoostingTrace {
        self.trace
    }

    /// L1(j) for all j at the current β.
    pub fn scores(&mut self) -> &[f64] {
        self.model.design().scores_into(&self.weights, &mut self.scores);
        &self.scores
    }

    /// Performs one iteration.
    pub fn step(&mut self) -> Result<StepRecord> {
        let design = self.model.design();
        design.scores_into(&self.weights, &mut self.scores);

        let mut best = 0;
        let mut best_abs = -1.0;
        for (j, &s) in self.scores.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::Numerical(format!("non-finite score for variable {j}")));
            }
            if s.abs() > best_abs {
                best = j;
                best_abs = s.abs();
            }
        }
        let score = self.scores[best];
        let curvature = design.curvature(&self.weights, best);
        if !(curvature >= MIN_CURVATURE) {
            return Err(Error::DegenerateCurvature {
                variable: best,
                value: curvature,
            });
        }
        let delta = self.rate * score / curvature;
        let old = self.beta[best];
        let new = old + delta;
        if !new.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite update for variable {best}"
            )));
        }
        self.beta[best] = new;
        match (old != 0.0, new != 0.0) {
            (false, true) => self.support_size += 1,
            (true, false) => self.support_size -= 1,
            _ => {}
        }
        design.update_eta(&mut self.eta, best, delta);
        let before = self.weights.log_likelihood();
        self.weights = RiskWeights::compute(self.model.index(), &self.eta)?;
        let after = self.weights.log_likelihood();

        let record = StepRecord {
            iteration: self.trace.len() + 1,
            variable: best,
            score,
            curvature,
            delta,
            coefficient: new,
            log_likelihood: after,
            ascent: after >= before,
        };
        self.trace.steps.push(record);
        Ok(record)
    }
}

/// Fits the model from β = 0 under `rule`.
pub fn run_boosting(
    data: &SurvivalDataset,
    config: &BoostingConfig,
    rule: &StoppingRule,
) -> Result<BoostingFit> {
    config.validate()?;
    rule.validate(data.p())?;
    match *rule {
        StoppingRule::Bic | StoppingRule::Aic | StoppingRule::Ebic { .. } => {
            let criterion = rule.criterion().expect("criterion rule");
            stopping::criterion_minimizing_run(data, config, criterion)
        }
        StoppingRule::CrossValidation {
            folds,
            max_iterations,
            seed,
        } => stopping::cross_validate(data, config, folds, max_iterations, seed)
            .map(|(_, fit)| fit),
        _ => {
            let model = ModelData::new(data);
            run_sequential(&model, config, rule)
        }
    }
}

/// Rules decided iteration by iteration: fixed, target size, likelihood
/// change.
pub(crate) fn run_sequential(
    model: &ModelData,
    config: &BoostingConfig,
    rule: &StoppingRule,
) -> Result<BoostingFit> {
    let mut booster = Booster::new(model, config.rate)?;
    let reason = match *rule {
        StoppingRule::Fixed { iterations } => {
            for _ in 0..iterations {
                booster.step()?;
            }
            StopReason::Completed
        }
        StoppingRule::NumSelected { target } => loop {
            if booster.support_size() == target {
                break StopReason::TargetReached;
            }
            if booster.iterations() >= config.max_iterations {
                break StopReason::IterationCap;
            }
            booster.step()?;
        },
        StoppingRule::LikelihoodChange { alpha } => loop {
            if booster.iterations() >= config.max_iterations {
                break StopReason::IterationCap;
            }
            let before = booster.log_likelihood();
            let record = booster.step()?;
            if stopping::likelihood_change_stop(before, record.log_likelihood, alpha) {
                break StopReason::LikelihoodConverged;
            }
        },
        _ => unreachable!("criterion and cross-validation rules are dispatched elsewhere"),
    };
    let trace = booster.into_trace();
    let m = trace.len();
    let mut fit = BoostingFit::from_trace(&trace, m, config.rate, *rule, reason);
    fit.boundary = reason == StopReason::IterationCap;
    Ok(fit)
}
