use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variables with at most this many distinct values are treated as
/// categorical.
pub const CATEGORICAL_LEVELS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Grouping {
    Categorical,
    MedianSplit { median: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataSummary {
    pub grouping: Grouping,
    pub groups: Vec<GroupSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Linear-interpolation quantile of sorted data (h = (n−1)·prob).
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn five_number_summary(group: String, times: &[f64]) -> GroupSummary {
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    GroupSummary {
        group,
        count: sorted.len(),
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    }
}

/// Survival-time summaries grouped by the levels of a candidate
/// stratification variable, or by a median split when it is continuous.
pub fn strata_summary(values: &[String], times: &[f64]) -> Result<StrataSummary> {
    if values.len() != times.len() {
        return Err(Error::validation(format!(
            "{} values but {} times",
            values.len(),
            times.len()
        )));
    }
    if values.is_empty() {
        return Err(Error::validation("no observations"));
    }
    if let Some(i) = times.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::at_row(i, format!("time must be positive, got {}", times[i])));
    }

    let numeric: Option<Vec<f64>> = values
        .iter()
        .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect();
    let distinct: BTreeSet<&str> = values.iter().map(|v| v.as_str()).collect();

    match numeric {
        Some(nums) if distinct.len() > CATEGORICAL_LEVELS => median_split(&nums, times),
        Some(nums) => {
            let mut levels: Vec<f64> = nums.clone();
            levels.sort_by(f64::total_cmp);
            levels.dedup();
            let groups = levels
                .iter()
                .map(|&level| {
                    let label = values[nums.iter().position(|&x| x == level).unwrap()].clone();
                    let t: Vec<f64> = nums
                        .iter()
                        .zip(times)
                        .filter(|(&x, _)| x == level)
                        .map(|(_, &t)| t)
                        .collect();
                    five_number_summary(label, &t)
                })
                .collect();
            Ok(StrataSummary {
                grouping: Grouping::Categorical,
                groups,
                warning: None,
            })
        }
        None => {
            let groups = distinct
                .iter()
                .map(|&level| {
                    let t: Vec<f64> = values
                        .iter()
                        .zip(times)
                        .filter(|(v, _)| v.as_str() == level)
                        .map(|(_, &t)| t)
                        .collect();
                    five_number_summary(level.to_string(), &t)
                })
                .collect();
            Ok(StrataSummary {
                grouping: Grouping::Categorical,
                groups,
                warning: None,
            })
        }
    }
}

fn median_split(values: &[f64], times: &[f64]) -> Result<StrataSummary> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile(&sorted, 0.5);
    let (low, high): (Vec<(f64, f64)>, Vec<(f64, f64)>) = values
        .iter()
        .copied()
        .zip(times.iter().copied())
        .partition(|(v, _)| *v <= median);
    let grouping = Grouping::MedianSplit { median };
    if low.is_empty() || high.is_empty() {
        return Ok(StrataSummary {
            grouping,
            groups: vec![five_number_summary("all".into(), times)],
            warning: Some("median split leaves one group empty".into()),
        });
    }
    let t = |g: &[(f64, f64)]| g.iter().map(|&(_, t)| t).collect::<Vec<_>>();
    Ok(StrataSummary {
        grouping,
        groups: vec![
            five_number_summary(format!("<= {median}"), &t(&low)),
            five_number_summary(format!("> {median}"), &t(&high)),
        ],
        warning: None,
    })
}
