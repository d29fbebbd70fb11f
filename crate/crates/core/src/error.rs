use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can surface. `exit_code` maps each variant to
/// exactly one CLI exit status.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{}", fmt_row("invalid data", *row, message))]
    Validation { row: Option<usize>, message: String },

    #[error("no events: every subject is censored")]
    NoEvents,

    #[error("parse error at line {line}, column '{column}': {message}")]
    Parse {
        line: usize,
        column: String,
        message: String,
    },

    #[error("all subjects censored (realized censoring rate {rate:.3})")]
    AllCensored { rate: f64 },

    #[error("infeasible folds: {0}")]
    InfeasibleFolds(String),

    #[error("infeasible subsample: {0}")]
    InfeasibleSubsample(String),

    #[error("schema version mismatch: expected {expected}, found {found}")]
    SchemaVersion { expected: u32, found: String },

    #[error("degenerate curvature for variable {variable} (second derivative {value:e})")]
    DegenerateCurvature { variable: usize, value: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("singular information matrix over the selected variables")]
    SingularHessian,

    #[error("refit did not converge within {iterations} iterations")]
    Divergence { iterations: usize },

    #[error("monotone likelihood: coefficient of variable {variable} exceeded {bound} in magnitude")]
    Separation { variable: usize, bound: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn fmt_row(prefix: &str, row: Option<usize>, message: &str) -> String {
    match row {
        Some(r) => format!("{prefix} at row {r}: {message}"),
        None => format!("{prefix}: {message}"),
    }
}

impl Error {
    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation {
            row: None,
            message: message.into(),
        }
    }

    pub(crate) fn at_row(row: usize, message: impl Into<String>) -> Self {
        Error::Validation {
            row: Some(row),
            message: message.into(),
        }
    }

    /// 1 usage, 2 data/validation, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) => 1,
            Error::Validation { .. }
            | Error::NoEvents
            | Error::Parse { .. }
            | Error::AllCensored { .. }
            | Error::InfeasibleFolds(_)
            | Error::InfeasibleSubsample(_)
            | Error::SchemaVersion { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::DegenerateCurvature { .. }
            | Error::Numerical(_)
            | Error::SingularHessian
            | Error::Divergence { .. }
            | Error::Separation { .. } => 3,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Validation { .. } => "validation",
            Error::NoEvents => "no_events",
            Error::Parse { .. } => "parse",
            Error::AllCensored { .. } => "all_censored",
            Error::InfeasibleFolds(_) => "infeasible_folds",
            Error::InfeasibleSubsample(_) => "infeasible_subsample",
            Error::SchemaVersion { .. } => "schema_version",
            Error::DegenerateCurvature { .. } => "degenerate_curvature",
            Error::Numerical(_) => "numerical_failure",
            Error::SingularHessian => "singular_hessian",
            Error::Divergence { .. } => "divergence",
            Error::Separation { .. } => "separation",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
