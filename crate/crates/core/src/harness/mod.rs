//! Experiment orchestration: stratified split, cross-validated random
//! search, train-side thresholds, test evaluation and report emission.

pub mod experiment;
pub mod report;
pub mod search;
pub mod split;

pub use experiment::{
    assemble_report, baseline_row, braden_baseline, evaluate_model, plan_experiment, run_experiment, train_kind,
    Baseline, CurvePoint, Derived, Experiment, ExperimentConfig, MetricsRow, ModelReport, Plan, Report,
    TestPoint, TrainThresholds, TrainedModel,
};
pub use report::emit_report;
pub use search::{evaluate_candidates, random_search, CvResult, SearchResult};
pub use split::{cv_folds, patient_units, split_stays, stay_units, Split, Unit};

/// Relative saving in interventions per true positive when precision rises
/// from `p_baseline` to `p_model` (cost is proportional to `1 / precision`).
/// Negative when the model is less precise.
pub fn cost_reduction(p_baseline: f64, p_model: f64) -> f64 {
    1.0 - p_baseline / p_model
}

/// Relative gain in sensitivity over the baseline.
pub fn care_improvement(s_model: f64, s_baseline: f64) -> f64 {
    s_model / s_baseline - 1.0
}
