//! Everything that happens after a boosting fit: hazard-ratio prediction,
//! refitting the selected model for inference, stability selection, and
//! survival-time summaries for choosing a stratification variable.

pub mod inference;
pub mod stability;
pub mod strata;

pub use inference::{
    hazard_ratios, newton_refit, predict_hazard_ratio, refit_inference, InferenceRow,
    InferenceTable,
};
pub use stability::{stability_selection, StabilityResult};
pub use strata::{strata_summary, GroupSummary, Grouping, StrataSummary};
