use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::boosting::ModelData;
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::likelihood::RiskWeights;

pub const Z_95: f64 = 1.96;
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
pub const STEP_TOLERANCE: f64 = 1e-6;
pub const MAX_NEWTON_ITERATIONS: usize = 100;
/// Coefficients beyond this magnitude indicate a monotone likelihood.
pub const SEPARATION_BOUND: f64 = 50.0;

/// HR_i = exp((x_i − x̄)ᵀβ) for query rows given column-wise.
pub fn predict_hazard_ratio(beta: &[f64], means: &[f64], columns: &[&[f64]]) -> Result<Vec<f64>> {
    if beta.len() != means.len() || beta.len() != columns.len() {
        return Err(Error::InvalidParameter(format!(
            "column mismatch: {} coefficients, {} means, {} query columns",
            beta.len(),
            means.len(),
            columns.len()
        )));
    }
    let n = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidParameter("query columns differ in length".into()));
    }
    let mut lp = vec![0.0; n];
    for ((&b, &m), col) in beta.iter().zip(means).zip(columns) {
        if b == 0.0 {
            continue;
        }
        for (acc, &x) in lp.iter_mut().zip(col.iter()) {
            *acc += (x - m) * b;
        }
    }
    Ok(lp.into_iter().map(f64::exp).collect())
}

/// Hazard ratios for `query`, centred at the covariate means of
/// `reference`. Columns are matched by name.
pub fn hazard_ratios(
    beta: &[f64],
    reference: &SurvivalDataset,
    query: &SurvivalDataset,
) -> Result<Vec<f64>> {
    let columns = query_columns(reference.names(), query)?;
    predict_hazard_ratio(beta, &reference.column_means(), &columns)
}

pub(crate) fn query_columns<'a>(
    names: &[String],
    query: &'a SurvivalDataset,
) -> Result<Vec<&'a [f64]>> {
    names
        .iter()
        .map(|name| {
            query
                .column_index(name)
                .map(|j| query.column(j))
                .ok_or_else(|| Error::validation(format!("query data lacks variable '{name}'")))
        })
        .collect()
}

/// Two-sided normal p-value 2·(1 − Φ(|z|)).
pub fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRow {
    pub variable: String,
    pub coef: f64,
    pub exp_coef: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    pub lower_95: f64,
    pub upper_95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceTable {
    pub n: usize,
    pub events: usize,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub rows: Vec<InferenceRow>,
}

/// Maximum partial likelihood over `selected` variables by damped Newton.
pub struct NewtonSolution {
    pub beta: Vec<f64>,
    pub gradient: Vec<f64>,
    pub information: DMatrix<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
}

fn evaluate(
    model: &ModelData,
    beta: &[f64],
) -> Result<(f64, Vec<f64>, DMatrix<f64>)> {
    let design = model.design();
    let eta = design.eta(beta);
    let weights = RiskWeights::compute(model.index(), &eta)?;
    let columns: Vec<&[f64]> = (0..model.p()).map(|j| design.column(j)).collect();
    let sums: Vec<f64> = (0..model.p()).map(|j| design.event_sum(j)).collect();
    let (grad, info) = weights.score_and_information(&sums, &columns);
    let s = model.p();
    Ok((weights.log_likelihood(), grad, DMatrix::from_row_slice(s, s, &info)))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

pub fn newton_refit(data: &SurvivalDataset, selected: &[usize]) -> Result<NewtonSolution> {
    if selected.is_empty() {
        return Err(Error::InvalidParameter("no variables selected for refit".into()));
    }
    if let Some(&j) = selected.iter().find(|&&j| j >= data.p()) {
        return Err(Error::InvalidParameter(format!("variable index {j} out of range")));
    }
    let sub = data.select_columns(selected);
    let model = ModelData::new(&sub);
    let s = selected.len();
    let mut beta = vec![0.0; s];
    let (mut ll, mut grad, mut info) = evaluate(&model, &beta)?;

    let mut last_step: Option<DVector<f64>> = None;
    for iteration in 0..=MAX_NEWTON_ITERATIONS {
        let Some(chol) = info.clone().cholesky() else {
            return Err(match &last_step {
                Some(d) => probe_separation(&model, &beta, ll, d, selected)?,
                None => Error::SingularHessian,
            });
        };
        let step = chol.solve(&DVector::from_column_slice(&grad));
        // A vanishing gradient with steps that stay large is a likelihood
        // still climbing toward infinity, not an optimum.
        if max_abs(&grad) < GRADIENT_TOLERANCE && step.amax() < STEP_TOLERANCE {
            return Ok(NewtonSolution {
                beta,
                gradient: grad,
                information: info,
                log_likelihood: ll,
                iterations: iteration,
            });
        }
        if iteration == MAX_NEWTON_ITERATIONS {
            break;
        }
        let mut scale = 1.0;
        loop {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, d)| b + scale * d).collect();
            if let Some(k) = trial.iter().position(|b| b.abs() > SEPARATION_BOUND) {
                return Err(Error::Separation {
                    variable: selected[k],
                    bound: SEPARATION_BOUND,
                });
            }
            let (tll, tgrad, tinfo) = evaluate(&model, &trial)?;
            if tll >= ll - 1e-12 * ll.abs().max(1.0) || scale < 1e-10 {
                last_step = Some(&step * scale);
                beta = trial;
                ll = tll;
                grad = tgrad;
                info = tinfo;
                break;
            }
            scale *= 0.5;
        }
    }
    Err(Error::Divergence {
        iterations: MAX_NEWTON_ITERATIONS,
    })
}

/// The information collapsed after some progress. Follow the last step
/// direction: if the likelihood never decreases until a coefficient passes
/// the separation bound, report separation, else a singular Hessian.
fn probe_separation(
    model: &ModelData,
    beta: &[f64],
    ll: f64,
    direction: &DVector<f64>,
    selected: &[usize],
) -> Result<Error> {
    let norm = direction.amax();
    if norm == 0.0 {
        return Ok(Error::SingularHessian);
    }
    let mut previous = ll;
    let mut t = 1.0;
    loop {
        let trial: Vec<f64> = beta
            .iter()
            .zip(direction.iter())
            .map(|(b, d)| b + t * d / norm)
            .collect();
        if let Some(k) = trial.iter().position(|b| b.abs() > SEPARATION_BOUND) {
            return Ok(Error::Separation {
                variable: selected[k],
                bound: SEPARATION_BOUND,
            });
        }
        let (tll, _, _) = evaluate(model, &trial)?;
        if tll < previous {
            return Ok(Error::SingularHessian);
        }
        previous = tll;
        t *= 2.0;
    }
}

/// Refit over the selected support with Wald standard errors.
pub fn refit_inference(data: &SurvivalDataset, selected: &[usize]) -> Result<InferenceTable> {
    let sol = newton_refit(data, selected)?;
    let chol = sol.information.clone().cholesky().ok_or(Error::SingularHessian)?;
    let cov = chol.inverse();
    let rows = selected
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let coef = sol.beta[k];
            let se = cov[(k, k)].sqrt();
            let z = coef / se;
            InferenceRow {
                variable: data.names()[j].clone(),
                coef,
                exp_coef: coef.exp(),
                se,
                z,
                p_value: normal_two_sided_p(z),
                lower_95: (coef - Z_95 * se).exp(),
                upper_95: (coef + Z_95 * se).exp(),
            }
        })
        .collect();
    Ok(InferenceTable {
        n: data.n(),
        events: data.num_events(),
        log_likelihood: sol.log_likelihood,
        iterations: sol.iterations,
        rows,
    })
}
