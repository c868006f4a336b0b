//! Pressure-injury risk prediction from daily EHR snapshots.
//!
//! The crate is organised as a pipeline:
//!
//! * [`cohort`] ingests event-stream CSV files, applies the cohort filters and
//!   enumerates admission-anchored stay-days.
//! * [`synthgen`] writes seeded synthetic cohorts in the same file format,
//!   together with the true per-day risk used as a reference.
//! * [`featurelab`] turns stay-days into windowed feature rows with
//!   7-day-horizon labels.
//! * [`pipeline`] couples the robust preprocessor with natively implemented
//!   classifiers (logistic regression, random forest, gradient boosting).
//! * [`staymetrics`] evaluates day-level scores at the stay level by
//!   OR-aggregation and sweeps precision/sensitivity operating points.
//! * [`harness`] runs stratified splits, cross-validated random search and
//!   emits the comparison report against the Braden baseline.
//!
//! Model and metric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below pin the `f64` instantiation used by the harness.

pub mod cohort;
pub mod error;
pub mod featurelab;
pub mod harness;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod staymetrics;
pub mod synthgen;
pub mod time;

pub use error::{Error, ErrorCategory, Result};
pub use scalar::Scalar;

pub type FittedPipelineF64 = pipeline::FittedPipeline<f64>;
pub type FittedPipelineF32 = pipeline::FittedPipeline<f32>;
pub type FittedPreprocessorF64 = pipeline::FittedPreprocessor;
pub type ModelF64 = pipeline::Model<f64>;
pub type ModelF32 = pipeline::Model<f32>;
pub type LogisticRegressionF64 = pipeline::logistic::LogisticRegression<f64>;
pub type RandomForestF64 = pipeline::forest::RandomForest<f64>;
pub type GradientBoostingF64 = pipeline::gbdt::GradientBoosting<f64>;
pub type StayScoreF64 = staymetrics::StayScore<f64>;
pub type OperatingPointF64 = staymetrics::OperatingPoint<f64>;
pub type PrCurveF64 = staymetrics::PrCurve<f64>;
pub type PrCurveF32 = staymetrics::PrCurve<f32>;
