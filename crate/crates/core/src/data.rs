//! Survival data container and the per-stratum risk-set ordering.

use std::collections::HashMap;
use std::ops::Range;

use crate::error::{Error, Result};

/// Unvalidated parallel columns, as read from a file or produced by a
/// generator.
#[derive(Debug, Clone, Default)]
pub struct RawColumns {
    pub time: Vec<f64>,
    pub status: Vec<i64>,
    /// Stratum labels; `None` puts every subject in a single stratum.
    pub stratum: Option<Vec<String>>,
    /// One vector per covariate, each of length n.
    pub covariates: Vec<Vec<f64>>,
    pub names: Vec<String>,
}

/// Observed times, event indicators, stratum ids and an n×p covariate
/// matrix (stored column-major).
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    time: Vec<f64>,
    status: Vec<bool>,
    stratum: Vec<usize>,
    stratum_labels: Option<Vec<String>>,
    num_strata: usize,
    covariates: Vec<f64>,
    names: Vec<String>,
}

/// Checks every dataset invariant and maps stratum labels to contiguous ids
/// in order of first appearance.
pub fn validate_dataset(raw: RawColumns) -> Result<SurvivalDataset> {
    let n = raw.time.len();
    if n == 0 {
        return Err(Error::validation("dataset has no rows"));
    }
    if raw.status.len() != n {
        return Err(Error::validation(format!(
            "length mismatch: {} times but {} status values",
            n,
            raw.status.len()
        )));
    }
    if raw.covariates.len() != raw.names.len() {
        return Err(Error::validation(format!(
            "{} covariate columns but {} names",
            raw.covariates.len(),
            raw.names.len()
        )));
    }
    for (name, col) in raw.names.iter().zip(&raw.covariates) {
        if col.len() != n {
            return Err(Error::validation(format!(
                "length mismatch: covariate '{name}' has {} values, expected {n}",
                col.len()
            )));
        }
    }
    let mut seen = HashMap::new();
    for (j, name) in raw.names.iter().enumerate() {
        if let Some(prev) = seen.insert(name.as_str(), j) {
            return Err(Error::validation(format!(
                "duplicate variable name '{name}' (columns {prev} and {j})"
            )));
        }
    }

    for (i, &t) in raw.time.iter().enumerate() {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::at_row(i, format!("time must be positive and finite, got {t}")));
        }
    }
    let mut status = Vec::with_capacity(n);
    for (i, &s) in raw.status.iter().enumerate() {
        match s {
            0 => status.push(false),
            1 => status.push(true),
            other => {
                return Err(Error::at_row(i, format!("status must be 0 or 1, got {other}")));
            }
        }
    }
    if !status.iter().any(|&s| s) {
        return Err(Error::NoEvents);
    }
    for (name, col) in raw.names.iter().zip(&raw.covariates) {
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::at_row(
                i,
                format!("covariate '{name}' is not finite ({})", col[i]),
            ));
        }
    }

    let (stratum, labels) = match raw.stratum {
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::validation(format!(
                    "length mismatch: {} stratum labels, expected {n}",
                    labels.len()
                )));
            }
            let mut ids = HashMap::new();
            let mut ordered = Vec::new();
            let mut stratum = Vec::with_capacity(n);
            for label in labels {
                let next = ids.len();
                let id = *ids.entry(label.clone()).or_insert_with(|| {
                    ordered.push(label);
                    next
                });
                stratum.push(id);
            }
            (stratum, Some(ordered))
        }
        None => (vec![0; n], None),
    };
    let num_strata = labels.as_ref().map_or(1, |l| l.len());

    let p = raw.covariates.len();
    let mut covariates = Vec::with_capacity(n * p);
    for col in raw.covariates {
        covariates.extend(col);
    }

    Ok(SurvivalDataset {
        time: raw.time,
        status,
        stratum,
        stratum_labels: labels,
        num_strata,
        covariates,
        names: raw.names,
    })
}

impl SurvivalDataset {
    pub fn n(&self) -> usize {
        self.time.len()
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn num_strata(&self) -> usize {
        self.num_strata
    }

    /// Number of events d.
    pub fn num_events(&self) -> usize {
        self.status.iter().filter(|&&s| s).count()
    }

    pub fn time(&self) -> &[f64] {
        &self.time
    }

    pub fn status(&self) -> &[bool] {
        &self.status
    }

    pub fn stratum(&self) -> &[usize] {
        &self.stratum
    }

    /// Original labels, indexed by stratum id. `None` when the data had no
    /// stratum column.
    pub fn stratum_labels(&self) -> Option<&[String]> {
        self.stratum_labels.as_deref()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.covariates[j * n..(j + 1) * n]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.covariates[j * self.n() + i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p()).map(|j| self.value(i, j)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column_means(&self) -> Vec<f64> {
        (0..self.p())
            .map(|j| self.column(j).iter().sum::<f64>() / self.n() as f64)
            .collect()
    }

    /// Subject ids belonging to each stratum, in original order.
    pub fn stratum_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.num_strata];
        for (i, &g) in self.stratum.iter().enumerate() {
            members[g].push(i);
        }
        members
    }

    /// Rows `indices` (in the given order). Stratum ids and labels are kept
    /// as-is so that strata remain comparable with the parent dataset.
    pub fn subset(&self, indices: &[usize]) -> Result<SurvivalDataset> {
        if indices.is_empty() {
            return Err(Error::validation("empty subset"));
        }
        let status: Vec<bool> = indices.iter().map(|&i| self.status[i]).collect();
        if !status.iter().any(|&s| s) {
            return Err(Error::NoEvents);
        }
        let m = indices.len();
        let mut covariates = Vec::with_capacity(m * self.p());
        for j in 0..self.p() {
            let col = self.column(j);
            covariates.extend(indices.iter().map(|&i| col[i]));
        }
        Ok(SurvivalDataset {
            time: indices.iter().map(|&i| self.time[i]).collect(),
            status,
            stratum: indices.iter().map(|&i| self.stratum[i]).collect(),
            stratum_labels: self.stratum_labels.clone(),
            num_strata: self.num_strata,
            covariates,
            names: self.names.clone(),
        })
    }

    /// Same subjects, keeping only the covariates in `columns`.
    pub fn select_columns(&self, columns: &[usize]) -> SurvivalDataset {
        let mut covariates = Vec::with_capacity(self.n() * columns.len());
        for &j in columns {
            covariates.extend_from_slice(self.column(j));
        }
        SurvivalDataset {
            time: self.time.clone(),
            status: self.status.clone(),
            stratum: self.stratum.clone(),
            stratum_labels: self.stratum_labels.clone(),
            num_strata: self.num_strata,
            covariates,
            names: columns.iter().map(|&j| self.names[j].clone()).collect(),
        }
    }
}

/// A run of equal times inside one stratum, as a range of sorted positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TieBlock {
    pub start: usize,
    pub end: usize,
    pub events: usize,
}

/// Subjects sorted by stratum, then by time descending (stable, so ties keep
/// original subject order). The risk set of an event subject is the prefix of
/// its stratum's ordering up to the end of its tie block.
#[derive(Debug, Clone, PartialEq)]
pub struct StratumIndex {
    order: Vec<usize>,
    position: Vec<usize>,
    strata: Vec<Range<usize>>,
    blocks: Vec<TieBlock>,
    block_of: Vec<usize>,
    stratum_start: Vec<bool>,
    events_at_end: Vec<f64>,
    sorted_event: Vec<bool>,
}

pub fn build_stratum_index(data: &SurvivalDataset) -> StratumIndex {
    let n = data.n();
    let time = data.time();
    let mut order = Vec::with_capacity(n);
    let mut strata = Vec::with_capacity(data.num_strata());
    for mut members in data.stratum_members() {
        members.sort_by(|&a, &b| time[b].total_cmp(&time[a]));
        let start = order.len();
        order.extend(members);
        strata.push(start..order.len());
    }

    let mut position = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        position[i] = pos;
    }

    let mut blocks = Vec::new();
    let mut block_of = vec![0; n];
    let mut stratum_start = vec![false; n];
    for range in &strata {
        if range.is_empty() {
            continue;
        }
        stratum_start[range.start] = true;
        let mut start = range.start;
        while start < range.end {
            let t = time[order[start]];
            let mut end = start + 1;
            while end < range.end && time[order[end]] == t {
                end += 1;
            }
            let events = (start..end).filter(|&k| data.status()[order[k]]).count();
            for slot in &mut block_of[start..end] {
                *slot = blocks.len();
            }
            blocks.push(TieBlock { start, end, events });
            start = end;
        }
    }

    let mut events_at_end = vec![0.0; n];
    for b in &blocks {
        events_at_end[b.end - 1] = b.events as f64;
    }
    let sorted_event = order.iter().map(|&i| data.status()[i]).collect();

    StratumIndex {
        order,
        position,
        strata,
        blocks,
        block_of,
        stratum_start,
        events_at_end,
        sorted_event,
    }
}

impl StratumIndex {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Sorted position → subject id.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Subject id → sorted position.
    pub fn position(&self, subject: usize) -> usize {
        self.position[subject]
    }

    /// Sorted position range of each stratum.
    pub fn strata(&self) -> &[Range<usize>] {
        &self.strata
    }

    pub fn blocks(&self) -> &[TieBlock] {
        &self.blocks
    }

    pub(crate) fn stratum_start(&self) -> &[bool] {
        &self.stratum_start
    }

    /// Event count of the tie block ending at each position, zero elsewhere.
    pub(crate) fn events_at_end(&self) -> &[f64] {
        &self.events_at_end
    }

    pub(crate) fn sorted_event(&self) -> &[bool] {
        &self.sorted_event
    }

    /// Sorted position range `start..end` whose subjects form the risk set of
    /// `subject` (all members of its stratum with time ≥ its time).
    pub fn risk_set_range(&self, subject: usize) -> Range<usize> {
        let pos = self.position[subject];
        let block = self.blocks[self.block_of[pos]];
        let stratum = self
            .strata
            .iter()
            .find(|r| r.contains(&pos))
            .expect("position belongs to a stratum");
        stratum.start..block.end
    }

    /// Subject ids in the risk set of `subject`, in sorted order.
    pub fn risk_set(&self, subject: usize) -> Vec<usize> {
        self.order[self.risk_set_range(subject)].to_vec()
    }

    /// Gathers a per-subject vector into sorted order.
    pub fn permute(&self, values: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&i| values[i]).collect()
    }

    /// Scatters a sorted-order vector back to subject order.
    pub fn unpermute(&self, sorted: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; sorted.len()];
        for (pos, &i) in self.order.iter().enumerate() {
            out[i] = sorted[pos];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(time: Vec<f64>, status: Vec<i64>, x: Vec<f64>) -> RawColumns {
        RawColumns {
            time,
            status,
            stratum: None,
            covariates: vec![x],
            names: vec!["x".into()],
        }
    }

    #[test]
    fn minimal_dataset_is_valid() {
        let d = validate_dataset(raw(vec![1.0, 2.0], vec![1, 0], vec![0.0, 1.0])).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.p(), 1);
        assert_eq!(d.num_strata(), 1);
        assert_eq!(d.num_events(), 1);
    }

    #[test]
    fn all_censored_is_rejected() {
        let err = validate_dataset(raw(vec![1.0, 2.0], vec![0, 0], vec![0.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::NoEvents));
    }

    #[test]
    fn labels_map_to_contiguous_ids() {
        let mut r = raw(vec![1.0, 2.0, 3.0], vec![1, 1, 0], vec![0.0, 1.0, 2.0]);
        r.stratum = Some(vec!["A".into(), "B".into(), "A".into()]);
        let d = validate_dataset(r).unwrap();
        assert_eq!(d.stratum(), &[0, 1, 0]);
        assert_eq!(d.num_strata(), 2);
        assert_eq!(d.stratum_labels().unwrap(), &["A".to_string(), "B".to_string()]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let e = validate_dataset(raw(vec![1.0, 2.0], vec![1], vec![0.0, 1.0])).unwrap_err();
        assert!(e.to_string().contains("length mismatch"));
        let e = validate_dataset(raw(vec![1.0, 0.0], vec![1, 1], vec![0.0, 1.0])).unwrap_err();
        assert!(matches!(e, Error::Validation { row: Some(1), .. }));
        let e = validate_dataset(raw(vec![1.0, f64::NAN], vec![1, 1], vec![0.0, 1.0])).unwrap_err();
        assert!(matches!(e, Error::Validation { row: Some(1), .. }));
        let e = validate_dataset(raw(vec![1.0, 2.0], vec![1, 2], vec![0.0, 1.0])).unwrap_err();
        assert!(e.to_string().contains("status"));
        let e =
            validate_dataset(raw(vec![1.0, 2.0], vec![1, 0], vec![0.0, f64::INFINITY])).unwrap_err();
        assert!(matches!(e, Error::Validation { row: Some(1), .. }));
    }

    #[test]
    fn descending_order_and_risk_sets() {
        let d = validate_dataset(raw(vec![3.0, 1.0, 2.0], vec![1, 1, 1], vec![0.0; 3])).unwrap();
        let idx = build_stratum_index(&d);
        assert_eq!(idx.order(), &[0, 2, 1]);
        assert_eq!(idx.risk_set(2), vec![0, 2]);
        assert_eq!(idx.risk_set(1), vec![0, 2, 1]);
    }

    #[test]
    fn strata_never_mix() {
        let mut r = raw(vec![5.0, 1.0], vec![1, 1], vec![0.0, 1.0]);
        r.stratum = Some(vec!["0".into(), "1".into()]);
        let d = validate_dataset(r).unwrap();
        let idx = build_stratum_index(&d);
        assert_eq!(idx.risk_set(0), vec![0]);
        assert_eq!(idx.risk_set(1), vec![1]);
    }

    #[test]
    fn tied_times_share_risk_set() {
        let d = validate_dataset(raw(vec![2.0, 2.0], vec![1, 1], vec![0.0, 1.0])).unwrap();
        let idx = build_stratum_index(&d);
        assert_eq!(idx.risk_set(0), vec![0, 1]);
        assert_eq!(idx.risk_set(1), vec![0, 1]);
        assert_eq!(idx.blocks().len(), 1);
        assert_eq!(idx.blocks()[0].events, 2);
    }

    #[test]
    fn subset_keeps_strata_layout() {
        let mut r = raw(vec![1.0, 2.0, 3.0], vec![1, 1, 0], vec![0.0, 1.0, 2.0]);
        r.stratum = Some(vec!["A".into(), "B".into(), "A".into()]);
        let d = validate_dataset(r).unwrap();
        let s = d.subset(&[0, 2]).unwrap();
        assert_eq!(s.num_strata(), 2);
        assert_eq!(s.column(0), &[0.0, 2.0]);
        let idx = build_stratum_index(&s);
        assert!(idx.strata()[1].is_empty());
        assert!(d.subset(&[2]).is_err());
    }
}
