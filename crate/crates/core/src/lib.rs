//! Componentwise gradient boosting for high-dimensional variable selection
//! in stratified Cox proportional hazards models.
//!
//! ```
//! use stratboost::{run_boosting, validate_dataset, BoostingConfig, RawColumns, StoppingRule};
//!
//! let data = validate_dataset(RawColumns {
//!     time: vec![3.0, 2.0, 1.0, 4.0],
//!     status: vec![1, 1, 0, 1],
//!     stratum: Some(vec!["a".into(), "a".into(), "b".into(), "b".into()]),
//!     covariates: vec![vec![1.0, 0.0, 2.0, -1.0]],
//!     names: vec!["x".into()],
//! })?;
//! let fit = run_boosting(&data, &BoostingConfig::new(0.1, 100), &StoppingRule::Fixed { iterations: 20 })?;
//! assert_eq!(fit.iterations_run, 20);
//! # Ok::<(), stratboost::Error>(())
//! ```

pub mod bench;
pub mod boosting;
pub mod cli;
pub mod data;
pub mod error;
pub mod io;
pub mod likelihood;
pub mod post_selection;
pub mod simulate;
pub mod stopping;

pub use boosting::{
    coefficient_path, run_boosting, selection_frequency, Booster, BoostingConfig, BoostingFit,
    BoostingTrace, ModelData, StepRecord, StopReason,
};
pub use data::{build_stratum_index, validate_dataset, RawColumns, StratumIndex, SurvivalDataset};
pub use error::{Error, Result};
pub use likelihood::{
    first_derivative, first_derivative_all, linear_predictor, log_partial_likelihood,
    second_derivative, ScoreStatistics,
};
pub use simulate::{selection_metrics, simulate_survival_cox, SimulationConfig};
pub use stopping::{cross_validate, criterion_minimizing_run, Criterion, StoppingRule};
