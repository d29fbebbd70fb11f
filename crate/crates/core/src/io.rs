//! CSV datasets and JSON result documents.
//!
//! Floats are written in shortest round-trip form, so every document
//! survives write → read → write byte for byte.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::boosting::{coefficient_path, selection_frequency, BoostingFit, StepRecord, StopReason};
use crate::data::{validate_dataset, RawColumns, SurvivalDataset};
use crate::error::{Error, Result};
use crate::simulate::SimulationConfig;
use crate::stopping::{CriterionHistory, CrossValidationResult, StoppingRule};

pub const SCHEMA_VERSION: u32 = 1;

/// Header plus string cells.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::validation(format!("column '{name}' not found")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<String>> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[j].clone()).collect())
    }

    /// Parses a column as finite reals, reporting the file line on failure.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| parse_real(&row[j], r, name))
            .collect()
    }

    fn try_numeric(&self, j: usize) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r[j].trim().parse::<f64>().ok()).collect()
    }
}

/// Data row `row` (0-based) sits on file line `row + 2`.
fn parse_real(cell: &str, row: usize, column: &str) -> Result<f64> {
    let parse_err = |message: String| Error::Parse {
        line: row + 2,
        column: column.to_string(),
        message,
    };
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| parse_err(format!("'{cell}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(format!("'{cell}' is not finite")));
    }
    Ok(v)
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(h.as_str()) {
            return Err(Error::validation(format!("duplicate column name '{h}'")));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record?.iter().map(str::to_string).collect());
    }
    Ok(Table { headers, rows })
}

/// Which columns play which role.
#[derive(Debug, Clone)]
pub struct ColumnRoles {
    pub time: String,
    pub status: String,
    pub stratum: Option<String>,
    /// Explicit covariates; `None` takes every other numeric column.
    pub covariates: Option<Vec<String>>,
}

impl Default for ColumnRoles {
    fn default() -> Self {
        ColumnRoles {
            time: "time".into(),
            status: "delta".into(),
            stratum: None,
            covariates: None,
        }
    }
}

pub fn dataset_from_table(table: &Table, roles: &ColumnRoles) -> Result<SurvivalDataset> {
    let time = table.numeric_column(&roles.time)?;
    let status = table
        .numeric_column(&roles.status)?
        .into_iter()
        .enumerate()
        .map(|(r, s)| {
            if s == 0.0 || s == 1.0 {
                Ok(s as i64)
            } else {
                Err(Error::Parse {
                    line: r + 2,
                    column: roles.status.clone(),
                    message: format!("status must be 0 or 1, got {s}"),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let stratum = roles.stratum.as_deref().map(|s| table.column(s)).transpose()?;

    let (names, covariates) = match &roles.covariates {
        Some(list) => {
            let cols = list
                .iter()
                .map(|name| table.numeric_column(name))
                .collect::<Result<Vec<_>>>()?;
            (list.clone(), cols)
        }
        None => {
            let reserved: Vec<&str> = [Some(roles.time.as_str()), Some(roles.status.as_str()), roles.stratum.as_deref()]
                .into_iter()
                .flatten()
                .collect();
            let mut names = Vec::new();
            let mut cols = Vec::new();
            for (j, h) in table.headers.iter().enumerate() {
                if reserved.contains(&h.as_str()) {
                    continue;
                }
                if let Some(col) = table.try_numeric(j) {
                    if let Some(r) = col.iter().position(|v| !v.is_finite()) {
                        return Err(Error::Parse {
                            line: r + 2,
                            column: h.clone(),
                            message: format!("'{}' is not finite", table.rows[r][j]),
                        });
                    }
                    names.push(h.clone());
                    cols.push(col);
                }
            }
            (names, cols)
        }
    };

    validate_dataset(RawColumns {
        time,
        status,
        stratum,
        covariates,
        names,
    })
    .map_err(|e| match e {
        Error::Validation {
            row: Some(r),
            message,
        } => Error::Validation {
            row: Some(r),
            message: format!("{message} (file line {})", r + 2),
        },
        other => other,
    })
}

pub fn read_dataset(path: &Path, roles: &ColumnRoles) -> Result<SurvivalDataset> {
    dataset_from_table(&read_table(path)?, roles)
}

/// Columns `time`, `delta`, then `strata` when the dataset has labels, then
/// the covariates.
pub fn write_dataset(data: &SurvivalDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let labels = data.stratum_labels();
    let mut header = vec!["time".to_string(), "delta".to_string()];
    if labels.is_some() {
        header.push("strata".into());
    }
    header.extend(data.names().iter().cloned());
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![data.time()[i].to_string(), (data.status()[i] as u8).to_string()];
        if let Some(l) = labels {
            rec.push(l[data.stratum()[i]].clone());
        }
        rec.extend((0..data.p()).map(|j| data.value(i, j).to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Wraps a result body with the schema version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Versioned<T> {
    pub fn new(body: T) -> Self {
        Versioned {
            schema_version: SCHEMA_VERSION,
            body,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub n: usize,
    pub p: usize,
    pub strata: usize,
    pub events: usize,
}

impl DatasetFingerprint {
    pub fn of(data: &SurvivalDataset) -> Self {
        DatasetFingerprint {
            n: data.n(),
            p: data.p(),
            strata: data.num_strata(),
            events: data.num_events(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDocument {
    pub variable: String,
    pub breakpoints: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub initial_log_likelihood: f64,
    pub steps: Vec<StepRecord>,
    pub selection_counts: IndexMap<String, usize>,
    pub first_selected: IndexMap<String, usize>,
    pub paths: Vec<PathDocument>,
}

/// Machine-readable fit summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub schema_version: u32,
    pub variables: Vec<String>,
    /// Nonzero coefficients by variable name.
    pub coefficients: IndexMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    /// Training covariate means, the reference for hazard ratios.
    pub covariate_means: Vec<f64>,
    pub iterations_run: usize,
    pub rate: f64,
    pub stopping: StoppingRule,
    pub stop_reason: StopReason,
    pub boundary: bool,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    pub dataset: DatasetFingerprint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<CriterionHistory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_validation: Option<CrossValidationResult>,
}

impl FitDocument {
    pub fn from_fit(
        fit: &BoostingFit,
        data: &SurvivalDataset,
        include_trace: bool,
        include_beta: bool,
    ) -> Self {
        let names = data.names();
        let coefficients = fit
            .selected
            .iter()
            .map(|&j| (names[j].clone(), fit.beta[j]))
            .collect();
        let trace = include_trace.then(|| {
            let freq = selection_frequency(&fit.trace);
            let path = coefficient_path(&fit.trace);
            TraceDocument {
                initial_log_likelihood: fit.trace.initial_log_likelihood,
                steps: fit.trace.steps.clone(),
                selection_counts: names
                    .iter()
                    .zip(&freq.counts)
                    .filter(|(_, &c)| c > 0)
                    .map(|(n, &c)| (n.clone(), c))
                    .collect(),
                first_selected: names
                    .iter()
                    .zip(&freq.first_selected)
                    .filter_map(|(n, f)| f.map(|m| (n.clone(), m)))
                    .collect(),
                paths: path
                    .breakpoints
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| !b.is_empty())
                    .map(|(j, b)| PathDocument {
                        variable: names[j].clone(),
                        breakpoints: b.clone(),
                    })
                    .collect(),
            }
        });
        FitDocument {
            schema_version: SCHEMA_VERSION,
            variables: names.to_vec(),
            coefficients,
            beta: include_beta.then(|| fit.beta.clone()),
            covariate_means: data.column_means(),
            iterations_run: fit.iterations_run,
            rate: fit.rate,
            stopping: fit.rule,
            stop_reason: fit.stop_reason,
            boundary: fit.boundary,
            log_likelihood: fit.log_likelihood,
            null_log_likelihood: fit.trace.initial_log_likelihood,
            dataset: DatasetFingerprint::of(data),
            trace,
            criterion: fit.criterion.clone(),
            cross_validation: fit.cross_validation.clone(),
        }
    }

    /// Full coefficient vector aligned with `variables`.
    pub fn beta_vector(&self) -> Vec<f64> {
        self.variables
            .iter()
            .map(|name| self.coefficients.get(name).copied().unwrap_or(0.0))
            .collect()
    }

    /// Indices of the nonzero coefficients.
    pub fn selected(&self) -> Vec<usize> {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, n)| self.coefficients.contains_key(*n))
            .map(|(j, _)| j)
            .collect()
    }
}

/// Known truth behind a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDocument {
    pub schema_version: u32,
    pub variables: Vec<String>,
    pub true_beta: Vec<f64>,
    pub seed: u64,
    pub n: usize,
    pub censoring_rate: f64,
    pub stratum_sizes: Vec<usize>,
    pub config: SimulationConfig,
}

pub fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(doc: &T, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(to_json(doc)?.as_bytes())?;
    Ok(())
}

/// Parses a versioned document, rejecting other schema versions before
/// looking at the body.
pub fn parse_versioned<T: DeserializeOwned>(text: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("schema_version") {
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION as u64) => Ok(serde_json::from_value(value)?),
        other => Err(Error::SchemaVersion {
            expected: SCHEMA_VERSION,
            found: other.map_or("none".into(), |v| v.to_string()),
        }),
    }
}

pub fn write_fit(doc: &FitDocument, path: &Path) -> Result<()> {
    write_json(doc, path)
}

pub fn read_fit(path: &Path) -> Result<FitDocument> {
    parse_versioned(&fs::read_to_string(path)?)
}

pub fn read_truth(path: &Path) -> Result<TruthDocument> {
    parse_versioned(&fs::read_to_string(path)?)
}

pub fn read_simulation_config(path: &Path) -> Result<SimulationConfig> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_three_rows() {
        let f = csv_file("time,delta,a,b\n1.5,1,0.1,2\n2,0,0.2,3\n3,1,0.3,4\n");
        let d = read_dataset(f.path(), &ColumnRoles::default()).unwrap();
        assert_eq!((d.n(), d.p(), d.num_strata()), (3, 2, 1));
        assert_eq!(d.names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn bad_status_names_row() {
        let f = csv_file("time,delta,a\n1,1,0\n2,2,1\n");
        let err = read_dataset(f.path(), &ColumnRoles::default()).unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "delta");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_numeric_columns_are_skipped_by_default() {
        let f = csv_file("id,time,delta,a,g\nx,1,1,0.5,m\ny,2,1,0.7,f\n");
        let roles = ColumnRoles {
            stratum: Some("g".into()),
            ..ColumnRoles::default()
        };
        let d = read_dataset(f.path(), &roles).unwrap();
        assert_eq!(d.names(), &["a".to_string()]);
        assert_eq!(d.num_strata(), 2);
    }

    #[test]
    fn nan_cell_is_reported() {
        let f = csv_file("time,delta,a\n1,1,NaN\n2,1,1\n");
        let err = read_dataset(f.path(), &ColumnRoles::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn missing_column_is_an_error() {
        let f = csv_file("t,delta,a\n1,1,0\n");
        assert!(read_dataset(f.path(), &ColumnRoles::default()).is_err());
    }

    #[test]
    fn unknown_schema_version() {
        let err = parse_versioned::<FitDocument>(r#"{"schema_version": 99}"#).unwrap_err();
        assert!(matches!(err, Error::SchemaVersion { .. }));
        let err = parse_versioned::<FitDocument>(r#"{"variables": []}"#).unwrap_err();
        assert!(matches!(err, Error::SchemaVersion { .. }));
    }
}
