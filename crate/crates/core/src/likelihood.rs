//! Stratified log partial likelihood and its coordinate derivatives.
//!
//! All risk-set sums are accumulated in one sweep over the descending-time
//! ordering of each stratum. The sums are kept relative to the running
//! maximum of the linear predictor, so `S_k` is stored as
//! `S_k · exp(-M_k)` where `M_k` is the largest η seen so far in the stratum.
//! When the maximum grows the accumulators are rescaled by
//! `exp(M_{k-1} - M_k) ≤ 1`, which never overflows.

use rayon::prelude::*;

use crate::data::{StratumIndex, SurvivalDataset};
use crate::error::{Error, Result};

/// Columns below this many cells are scanned serially.
const PARALLEL_CELLS: usize = 1 << 16;

/// Risk-set sums for one (subject, variable) pair, scaled by
/// `exp(-log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreStatistics {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub log_scale: f64,
}

/// Per-position sweep coefficients for one linear predictor.
#[derive(Debug, Clone)]
pub struct RiskWeights {
    omega: Vec<f64>,
    rescale: Vec<f64>,
    s0: Vec<f64>,
    block_coef: Vec<f64>,
    events_at_end: Vec<f64>,
    log_likelihood: f64,
}

impl RiskWeights {
    /// `eta_sorted` is the linear predictor in the index's sorted order.
    pub fn compute(index: &StratumIndex, eta_sorted: &[f64]) -> Result<Self> {
        let n = index.len();
        debug_assert_eq!(eta_sorted.len(), n);
        let starts = index.stratum_start();
        let d = index.events_at_end();
        let is_event = index.sorted_event();

        let mut omega = vec![0.0; n];
        let mut rescale = vec![0.0; n];
        let mut s0 = vec![0.0; n];
        let mut block_coef = vec![0.0; n];

        let mut max = f64::NEG_INFINITY;
        let mut acc = 0.0;
        let mut event_eta = 0.0;
        let mut log_sums = 0.0;
        for k in 0..n {
            let e = eta_sorted[k];
            if !e.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite linear predictor ({e}) at sorted position {k}"
                )));
            }
            if starts[k] {
                max = e;
                rescale[k] = 0.0;
            } else if e > max {
                rescale[k] = (max - e).exp();
                max = e;
            } else {
                rescale[k] = 1.0;
            }
            omega[k] = (e - max).exp();
            acc = acc * rescale[k] + omega[k];
            s0[k] = acc;
            if is_event[k] {
                event_eta += e;
            }
            if d[k] > 0.0 {
                block_coef[k] = d[k] / acc;
                log_sums += d[k] * (max + acc.ln());
            }
        }
        let log_likelihood = event_eta - log_sums;
        if !log_likelihood.is_finite() {
            return Err(Error::Numerical("log partial likelihood is not finite".into()));
        }
        Ok(RiskWeights {
            omega,
            rescale,
            s0,
            block_coef,
            events_at_end: d.to_vec(),
            log_likelihood,
        })
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// L1 for a sorted column whose event-subject values sum to `event_sum`.
    pub fn score(&self, event_sum: f64, x: &[f64]) -> f64 {
        let mut s1 = 0.0;
        let mut acc = 0.0;
        for k in 0..x.len() {
            s1 = s1 * self.rescale[k] + x[k] * self.omega[k];
            acc += self.block_coef[k] * s1;
        }
        event_sum - acc
    }

    /// L2 for a sorted column: the event-weighted sum of risk-set variances.
    pub fn curvature(&self, x: &[f64]) -> f64 {
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        let mut acc = 0.0;
        for k in 0..x.len() {
            let r = self.rescale[k];
            let wx = x[k] * self.omega[k];
            s1 = s1 * r + wx;
            s2 = s2 * r + x[k] * wx;
            let d = self.events_at_end[k];
            if d > 0.0 {
                let mean = s1 / self.s0[k];
                let var = s2 / self.s0[k] - mean * mean;
                acc += d * var.max(0.0);
            }
        }
        acc
    }

    /// Gradient over `columns` and the observed information (negative
    /// Hessian) over the same columns, row-major.
    pub fn score_and_information(
        &self,
        event_sums: &[f64],
        columns: &[&[f64]],
    ) -> (Vec<f64>, Vec<f64>) {
        let s = columns.len();
        let n = self.omega.len();
        let mut s1 = vec![0.0; s];
        let mut s2 = vec![0.0; s * s];
        let mut grad = event_sums.to_vec();
        let mut info = vec![0.0; s * s];
        for k in 0..n {
            let r = self.rescale[k];
            let w = self.omega[k];
            for a in 0..s {
                let xa = columns[a][k];
                s1[a] = s1[a] * r + xa * w;
                for b in 0..s {
                    s2[a * s + b] = s2[a * s + b] * r + xa * columns[b][k] * w;
                }
            }
            let d = self.events_at_end[k];
            if d > 0.0 {
                let s0 = self.s0[k];
                for a in 0..s {
                    let ma = s1[a] / s0;
                    grad[a] -= d * ma;
                    for b in 0..s {
                        let mb = s1[b] / s0;
                        info[a * s + b] += d * (s2[a * s + b] / s0 - ma * mb);
                    }
                }
            }
        }
        (grad, info)
    }
}

/// Covariates permuted into sorted order and centered per column.
///
/// Centering leaves the likelihood and its derivatives unchanged
/// mathematically but makes constant columns exactly zero.
#[derive(Debug, Clone)]
pub struct SortedDesign {
    n: usize,
    p: usize,
    columns: Vec<f64>,
    centers: Vec<f64>,
    event_sums: Vec<f64>,
}

fn column_center(col: &[f64]) -> f64 {
    let first = col[0];
    if col.iter().all(|&v| v == first) {
        first
    } else {
        col.iter().sum::<f64>() / col.len() as f64
    }
}

impl SortedDesign {
    pub fn new(data: &SurvivalDataset, index: &StratumIndex) -> Self {
        let n = data.n();
        let p = data.p();
        let mut columns = Vec::with_capacity(n * p);
        let mut centers = Vec::with_capacity(p);
        let mut event_sums = Vec::with_capacity(p);
        let is_event = index.sorted_event();
        for j in 0..p {
            let col = data.column(j);
            let c = column_center(col);
            let start = columns.len();
            columns.extend(index.order().iter().map(|&i| col[i] - c));
            let sorted = &columns[start..];
            event_sums.push(
                sorted
                    .iter()
                    .zip(is_event)
                    .filter(|(_, &e)| e)
                    .map(|(v, _)| v)
                    .sum(),
            );
            centers.push(c);
        }
        SortedDesign {
            n,
            p,
            columns,
            centers,
            event_sums,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Centered column `j` in sorted order.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j * self.n..(j + 1) * self.n]
    }

    pub fn center(&self, j: usize) -> f64 {
        self.centers[j]
    }

    pub fn event_sum(&self, j: usize) -> f64 {
        self.event_sums[j]
    }

    pub fn score(&self, weights: &RiskWeights, j: usize) -> f64 {
        weights.score(self.event_sums[j], self.column(j))
    }

    pub fn curvature(&self, weights: &RiskWeights, j: usize) -> f64 {
        weights.curvature(self.column(j))
    }

    /// Writes L1(j) for every j into `out`. Each entry is computed
    /// independently, so the result does not depend on the thread count.
    pub fn scores_into(&self, weights: &RiskWeights, out: &mut [f64]) {
        if self.n * self.p >= PARALLEL_CELLS && rayon::current_num_threads() > 1 {
            out.par_iter_mut()
                .enumerate()
                .for_each(|(j, o)| *o = self.score(weights, j));
        } else {
            for (j, o) in out.iter_mut().enumerate() {
                *o = self.score(weights, j);
            }
        }
    }

    /// Adds `delta` times centered column `j` to a sorted linear predictor.
    pub fn update_eta(&self, eta_sorted: &mut [f64], j: usize, delta: f64) {
        for (e, x) in eta_sorted.iter_mut().zip(self.column(j)) {
            *e += delta * x;
        }
    }

    /// Centered linear predictor in sorted order for a full coefficient vector.
    pub fn eta(&self, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![0.0; self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                self.update_eta(&mut eta, j, b);
            }
        }
        eta
    }
}

/// η_i = Σ_j β_j X_ij.
pub fn linear_predictor(data: &SurvivalDataset, beta: &[f64]) -> Result<Vec<f64>> {
    check_beta(data, beta)?;
    let mut eta = vec![0.0; data.n()];
    for (j, &b) in beta.iter().enumerate() {
        if b != 0.0 {
            update_linear_predictor(&mut eta, data.column(j), b);
        }
    }
    if eta.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numerical("linear predictor overflow".into()));
    }
    Ok(eta)
}

/// Refreshes η after a single coordinate changed by `delta`.
pub fn update_linear_predictor(eta: &mut [f64], column: &[f64], delta: f64) {
    for (e, x) in eta.iter_mut().zip(column) {
        *e += delta * x;
    }
}

fn check_beta(data: &SurvivalDataset, beta: &[f64]) -> Result<()> {
    if beta.len() != data.p() {
        return Err(Error::InvalidParameter(format!(
            "coefficient vector has length {}, dataset has {} variables",
            beta.len(),
            data.p()
        )));
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidParameter("non-finite coefficient".into()));
    }
    Ok(())
}

pub fn log_partial_likelihood(
    data: &SurvivalDataset,
    index: &StratumIndex,
    beta: &[f64],
) -> Result<f64> {
    let eta = linear_predictor(data, beta)?;
    log_partial_likelihood_eta(index, &eta)
}

/// Log partial likelihood from a subject-order linear predictor.
pub fn log_partial_likelihood_eta(index: &StratumIndex, eta: &[f64]) -> Result<f64> {
    Ok(RiskWeights::compute(index, &index.permute(eta))?.log_likelihood())
}

fn sorted_column(data: &SurvivalDataset, index: &StratumIndex, j: usize) -> (Vec<f64>, f64) {
    let col = data.column(j);
    let c = column_center(col);
    let x: Vec<f64> = index.order().iter().map(|&i| col[i] - c).collect();
    let event_sum = x
        .iter()
        .zip(index.sorted_event())
        .filter(|(_, &e)| e)
        .map(|(v, _)| v)
        .sum();
    (x, event_sum)
}

fn check_var(data: &SurvivalDataset, j: usize) -> Result<()> {
    if j >= data.p() {
        return Err(Error::InvalidParameter(format!(
            "variable index {j} out of range (p = {})",
            data.p()
        )));
    }
    Ok(())
}

/// L1(j) = Σ_events { X_ij − S_1(i,j)/S_0(i) }.
pub fn first_derivative(
    data: &SurvivalDataset,
    index: &StratumIndex,
    eta: &[f64],
    j: usize,
) -> Result<f64> {
    check_var(data, j)?;
    let w = RiskWeights::compute(index, &index.permute(eta))?;
    let (x, event_sum) = sorted_column(data, index, j);
    Ok(w.score(event_sum, &x))
}

pub fn first_derivative_all(
    data: &SurvivalDataset,
    index: &StratumIndex,
    eta: &[f64],
) -> Result<Vec<f64>> {
    let design = SortedDesign::new(data, index);
    let w = RiskWeights::compute(index, &index.permute(eta))?;
    let mut out = vec![0.0; data.p()];
    design.scores_into(&w, &mut out);
    Ok(out)
}

/// L2(j) = Σ_events [ S_2(i,j)/S_0(i) − (S_1(i,j)/S_0(i))² ], the negative
/// second derivative of the log partial likelihood in coordinate j.
pub fn second_derivative(
    data: &SurvivalDataset,
    index: &StratumIndex,
    eta: &[f64],
    j: usize,
) -> Result<f64> {
    check_var(data, j)?;
    let w = RiskWeights::compute(index, &index.permute(eta))?;
    let (x, _) = sorted_column(data, index, j);
    Ok(w.curvature(&x))
}

/// Direct risk-set sums for one subject and variable, shifted by the largest
/// η in the risk set.
pub fn score_statistics(
    data: &SurvivalDataset,
    index: &StratumIndex,
    eta: &[f64],
    subject: usize,
    j: usize,
) -> Result<ScoreStatistics> {
    check_var(data, j)?;
    let members = &index.order()[index.risk_set_range(subject)];
    let shift = members
        .iter()
        .map(|&l| eta[l])
        .fold(f64::NEG_INFINITY, f64::max);
    let col = data.column(j);
    let mut stats = ScoreStatistics {
        s0: 0.0,
        s1: 0.0,
        s2: 0.0,
        log_scale: shift,
    };
    for &l in members {
        let w = (eta[l] - shift).exp();
        stats.s0 += w;
        stats.s1 += col[l] * w;
        stats.s2 += col[l] * col[l] * w;
    }
    Ok(stats)
}
