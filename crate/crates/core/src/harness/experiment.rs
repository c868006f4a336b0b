//! End-to-end experiment: split, search, refit, train-side thresholds and
//! test-side evaluation against the Braden baseline.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::search::{model_seed, random_search, CvResult};
use super::split::{cv_folds, patient_units, split_stays, stay_units, Split};
use super::{care_improvement, cost_reduction};
use crate::error::{Error, Result};
use crate::featurelab::DayDataset;
use crate::pipeline::{schema_hash, stay_set_digest, FittedPipeline, Hyperparameters, ModelKind};
use crate::staymetrics::{
    braden_score, collect_stay_scores, confusion, pr_curve, precision_at_sensitivity, sensitivity_at_precision,
    ConfusionCounts, PrCurve, StayScore,
};

pub const REPORT_FORMAT: &str = "pirisk-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset file written by `extract`.
    pub dataset: Option<PathBuf>,
    /// Cohort directory; needed only to group stays by patient.
    pub cohort: Option<PathBuf>,
    pub models: Vec<ModelKind>,
    pub split_ratio: f64,
    pub cv_folds: usize,
    pub search_samples: usize,
    pub target_sensitivity: f64,
    /// Precision at which sensitivities are read. Defaults to the Braden
    /// baseline's training precision at the target sensitivity.
    pub reference_precision: Option<f64>,
    pub seed: u64,
    pub group_by_patient: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            cohort: None,
            models: ModelKind::ALL.to_vec(),
            split_ratio: 0.8,
            cv_folds: 5,
            search_samples: 30,
            target_sensitivity: 0.5,
            reference_precision: None,
            seed: 42,
            group_by_patient: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Relative paths in the file resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| e.context(path.display().to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset, &mut cfg.cohort].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad("split_ratio must lie in (0, 1)");
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be at least 2");
        }
        if self.search_samples < 1 {
            return bad("search_samples must be at least 1");
        }
        if !(self.target_sensitivity > 0.0 && self.target_sensitivity <= 1.0) {
            return bad("target_sensitivity must lie in (0, 1]");
        }
        if let Some(p) = self.reference_precision {
            if !(p > 0.0 && p <= 1.0) {
                return bad("reference_precision must lie in (0, 1]");
            }
        }
        let mut seen = BTreeSet::new();
        if !self.models.iter().all(|m| seen.insert(*m)) {
            return bad("models lists a kind twice");
        }
        if self.group_by_patient && self.cohort.is_none() {
            return bad("group_by_patient needs the cohort directory");
        }
        Ok(())
    }
}

/// Row assignment shared by every stage of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub split: Split,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub fold_rows: Vec<Vec<usize>>,
}

pub fn plan_experiment(
    cfg: &ExperimentConfig,
    ds: &DayDataset,
    patient_of: Option<&BTreeMap<String, String>>,
) -> Result<Plan> {
    cfg.validate()?;
    let units = match (cfg.group_by_patient, patient_of) {
        (true, Some(p)) => patient_units(&ds.stay_labels, p)?,
        (true, None) => return Err(Error::Config("group_by_patient needs stay-to-patient links".into())),
        (false, _) => stay_units(&ds.stay_labels),
    };
    let split = split_stays(&units, cfg.split_ratio, cfg.seed)?;
    let folds = cv_folds(&split.train, cfg.cv_folds, cfg.seed)?;
    let by_stay = ds.rows_by_stay();
    let rows_of = |stays: &mut dyn Iterator<Item = &String>| -> Vec<usize> {
        let mut v: Vec<usize> = stays.flat_map(|s| by_stay.get(s.as_str()).into_iter().flatten().copied()).collect();
        v.sort_unstable();
        v
    };
    let train_rows = rows_of(&mut split.train.iter().flat_map(|u| &u.stays));
    let test_rows = rows_of(&mut split.test.iter().flat_map(|u| &u.stays));
    let fold_rows = folds
        .iter()
        .map(|f| rows_of(&mut f.iter().flat_map(|u| &u.stays)))
        .collect();
    Ok(Plan {
        split,
        train_rows,
        test_rows,
        fold_rows,
    })
}

/// A curve point; `threshold` is `None` for the `+inf` sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: Option<f64>,
    pub sensitivity: f64,
    pub precision: f64,
}

pub fn curve_points(curve: &PrCurve<f64>) -> Vec<CurvePoint> {
    curve
        .points
        .iter()
        .map(|p| CurvePoint {
            threshold: (!p.is_sentinel()).then_some(p.threshold),
            sensitivity: p.sensitivity,
            precision: p.precision,
        })
        .collect()
}

/// Thresholds fixed on training stays, then applied unchanged to test stays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainThresholds {
    /// Largest threshold reaching the target sensitivity.
    pub at_target: f64,
    /// Threshold of highest sensitivity at the reference precision, if any.
    pub at_reference: Option<f64>,
}

impl TrainThresholds {
    pub fn from_curve(curve: &PrCurve<f64>, target: f64, reference: f64) -> Result<Self> {
        Ok(Self {
            at_target: precision_at_sensitivity(curve, target)?.threshold,
            at_reference: sensitivity_at_precision(curve, reference).ok().map(|p| p.threshold),
        })
    }
}

/// Test-side confusion at a train-fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestPoint {
    pub threshold: Option<f64>,
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
    pub counts: Option<ConfusionCounts>,
}

impl TestPoint {
    fn at(stays: &[StayScore<f64>], threshold: Option<f64>) -> Self {
        let counts = threshold.map(|t| confusion(stays, t));
        Self {
            threshold,
            sensitivity: counts.and_then(|c| c.sensitivity()),
            precision: counts.and_then(|c| c.precision()),
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub name: String,
    pub code: String,
    pub train_thresholds: TrainThresholds,
    /// Test metrics at the train-fixed target-sensitivity threshold.
    pub test_at_target: TestPoint,
    /// Test metrics at the train-fixed reference-precision threshold.
    pub test_at_reference: TestPoint,
    /// Readings taken directly off the test curve.
    pub curve_precision_at_target: f64,
    pub curve_sensitivity_at_target: f64,
    pub curve_sensitivity_at_reference: Option<f64>,
    pub test_stays: usize,
    /// Test stays without any scored day.
    pub excluded_stays: usize,
    pub curve: Vec<CurvePoint>,
}

/// Figures relative to the baseline, from the train-fixed operating points
/// and from the test-curve readings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub cost_reduction: Option<f64>,
    pub care_improvement: Option<f64>,
    pub curve_cost_reduction: Option<f64>,
    pub curve_care_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    #[serde(flatten)]
    pub metrics: MetricsRow,
    pub hyperparameters: Hyperparameters,
    pub cv_mean: f64,
    pub cv_fold_scores: Vec<f64>,
    pub derived: Derived,
    pub artifact_sha256: String,
    pub candidates: Vec<CvResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train_stays: usize,
    pub train_positive_stays: usize,
    pub test_stays: usize,
    pub test_positive_stays: usize,
    pub train_rows: usize,
    pub test_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format: String,
    pub format_version: u32,
    pub seed: u64,
    pub split_ratio: f64,
    pub cv_folds: usize,
    pub search_samples: usize,
    pub group_by_patient: bool,
    pub target_sensitivity: f64,
    pub reference_precision: f64,
    /// Baseline precision at the target sensitivity on the test curve; the
    /// curve sensitivities of each model are read at this precision.
    pub curve_reference_precision: f64,
    pub schema_hash: String,
    pub dataset_rows: usize,
    pub dataset_stays: usize,
    pub dataset_positive_stays: usize,
    pub split: SplitSummary,
    pub train_stays_digest: String,
    pub test_stays_digest: String,
    pub baseline: MetricsRow,
    pub models: Vec<ModelReport>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::Artifact(format!("unreadable report: {e}")))?;
        if r.format != REPORT_FORMAT || r.format_version != REPORT_VERSION {
            return Err(Error::Artifact(format!(
                "unsupported report format {} v{}",
                r.format, r.format_version
            )));
        }
        Ok(r)
    }
}

/// Braden evaluation on both sides of the split.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub train_curve: PrCurve<f64>,
    pub test_stays: Vec<StayScore<f64>>,
    pub test_excluded: usize,
    pub reference_precision: f64,
    pub thresholds: TrainThresholds,
}

fn braden_stays(ds: &DayDataset, rows: &[usize]) -> Result<(Vec<StayScore<f64>>, usize)> {
    let (stays, _) = collect_stay_scores(
        rows.iter()
            .filter_map(|&r| ds.rows[r].latest_braden.map(|b| (ds.rows[r].stay_id.as_str(), braden_score(b)))),
        &ds.stay_labels,
    )?;
    let distinct: BTreeSet<&str> = rows.iter().map(|&r| ds.rows[r].stay_id.as_str()).collect();
    let excluded = distinct.len() - stays.len();
    Ok((stays, excluded))
}

pub fn braden_baseline(cfg: &ExperimentConfig, ds: &DayDataset, plan: &Plan) -> Result<Baseline> {
    let (train, _) = braden_stays(ds, &plan.train_rows)?;
    let train_curve = pr_curve(&train).map_err(|e| e.context("Braden baseline"))?;
    let reference_precision = match cfg.reference_precision {
        Some(p) => p,
        None => precision_at_sensitivity(&train_curve, cfg.target_sensitivity)?.precision,
    };
    let thresholds = TrainThresholds::from_curve(&train_curve, cfg.target_sensitivity, reference_precision)?;
    let (test_stays, test_excluded) = braden_stays(ds, &plan.test_rows)?;
    Ok(Baseline {
        train_curve,
        test_stays,
        test_excluded,
        reference_precision,
        thresholds,
    })
}

/// A refitted model together with its search record and train-side thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub best_index: usize,
    pub candidates: Vec<CvResult>,
    pub thresholds: TrainThresholds,
    #[serde(skip)]
    pub pipeline: Option<FittedPipeline<f64>>,
}

/// Searches on the training folds, refits the winner on every training row
/// and fixes its thresholds on the winner's out-of-fold training scores.
pub fn train_kind(
    cfg: &ExperimentConfig,
    ds: &DayDataset,
    plan: &Plan,
    kind: ModelKind,
    reference_precision: f64,
) -> Result<TrainedModel> {
    let run = || -> Result<TrainedModel> {
        let search = random_search(ds, &plan.fold_rows, kind, cfg.search_samples, cfg.seed, cfg.target_sensitivity)?;
        let best = search.best();
        let (oof, _) = collect_stay_scores(
            best.out_of_fold.iter().map(|&(r, s)| (ds.rows[r].stay_id.as_str(), s)),
            &ds.stay_labels,
        )?;
        let thresholds = TrainThresholds::from_curve(&pr_curve(&oof)?, cfg.target_sensitivity, reference_precision)?;
        let seed = model_seed(cfg.seed, kind, best.index, cfg.cv_folds);
        let pipeline = FittedPipeline::fit(ds, &plan.train_rows, &best.hyperparameters, seed)?;
        Ok(TrainedModel {
            kind,
            best_index: search.best,
            candidates: search.results,
            thresholds,
            pipeline: Some(pipeline),
        })
    };
    run().map_err(|e| e.context(format!("model {kind}")))
}

fn metrics_row(
    name: &str,
    code: &str,
    stays: &[StayScore<f64>],
    excluded: usize,
    thresholds: TrainThresholds,
    target: f64,
    curve_reference: f64,
) -> Result<MetricsRow> {
    let curve = pr_curve(stays)?;
    let at_target = precision_at_sensitivity(&curve, target)?;
    Ok(MetricsRow {
        name: name.to_string(),
        code: code.to_string(),
        train_thresholds: thresholds,
        test_at_target: TestPoint::at(stays, Some(thresholds.at_target)),
        test_at_reference: TestPoint::at(stays, thresholds.at_reference),
        curve_precision_at_target: at_target.precision,
        curve_sensitivity_at_target: at_target.sensitivity,
        curve_sensitivity_at_reference: sensitivity_at_precision(&curve, curve_reference).ok().map(|p| p.sensitivity),
        test_stays: stays.len() + excluded,
        excluded_stays: excluded,
        curve: curve_points(&curve),
    })
}

fn baseline_curve_reference(baseline: &Baseline, target: f64) -> Result<f64> {
    Ok(precision_at_sensitivity(&pr_curve(&baseline.test_stays)?, target)?.precision)
}

pub fn baseline_row(cfg: &ExperimentConfig, baseline: &Baseline) -> Result<MetricsRow> {
    let reference = baseline_curve_reference(baseline, cfg.target_sensitivity)?;
    metrics_row(
        "Braden",
        "braden",
        &baseline.test_stays,
        baseline.test_excluded,
        baseline.thresholds,
        cfg.target_sensitivity,
        reference,
    )
}

fn ratio(f: fn(f64, f64) -> f64, a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some(f(a, b)),
        _ => None,
    }
}

pub fn derived(baseline: &MetricsRow, model: &MetricsRow) -> Derived {
    Derived {
        cost_reduction: ratio(cost_reduction, baseline.test_at_target.precision, model.test_at_target.precision),
        care_improvement: ratio(
            care_improvement,
            model.test_at_reference.sensitivity,
            baseline.test_at_target.sensitivity,
        ),
        curve_cost_reduction: ratio(
            cost_reduction,
            Some(baseline.curve_precision_at_target),
            Some(model.curve_precision_at_target),
        ),
        curve_care_improvement: ratio(
            care_improvement,
            model.curve_sensitivity_at_reference,
            Some(baseline.curve_sensitivity_at_target),
        ),
    }
}

/// Scores the test rows with a trained model and builds its report entry.
pub fn evaluate_model(
    cfg: &ExperimentConfig,
    ds: &DayDataset,
    plan: &Plan,
    baseline: &Baseline,
    baseline_row: &MetricsRow,
    trained: &TrainedModel,
    pipeline: &FittedPipeline<f64>,
) -> Result<ModelReport> {
    let run = || -> Result<ModelReport> {
        let test_stays = plan.split.test_stays().len();
        let train_digest = stay_set_digest(plan.split.train_stays().iter().map(String::as_str));
        if pipeline.metadata.training_stays_digest != train_digest {
            return Err(Error::Artifact("model was not fitted on this experiment's training stays".into()));
        }
        let scores = pipeline.predict_rows(ds, &plan.test_rows)?;
        let (stays, _) = collect_stay_scores(
            plan.test_rows
                .iter()
                .zip(&scores)
                .map(|(&r, &s)| (ds.rows[r].stay_id.as_str(), s)),
            &ds.stay_labels,
        )?;
        let reference = baseline_curve_reference(baseline, cfg.target_sensitivity)?;
        let kind = trained.kind;
        let metrics = metrics_row(
            kind.display_name(),
            kind.code(),
            &stays,
            test_stays - stays.len(),
            trained.thresholds,
            cfg.target_sensitivity,
            reference,
        )?;
        let best = &trained.candidates[trained.best_index];
        Ok(ModelReport {
            derived: derived(baseline_row, &metrics),
            metrics,
            hyperparameters: best.hyperparameters,
            cv_mean: best.mean.expect("winning candidate has a mean"),
            cv_fold_scores: best.fold_scores.clone(),
            artifact_sha256: hex::encode(Sha256::digest(pipeline.to_json()?.as_bytes())),
            candidates: trained.candidates.clone(),
        })
    };
    run().map_err(|e| e.context(format!("model {}", trained.kind)))
}

pub fn assemble_report(
    cfg: &ExperimentConfig,
    ds: &DayDataset,
    plan: &Plan,
    baseline: &Baseline,
    baseline_row: MetricsRow,
    models: Vec<ModelReport>,
) -> Result<Report> {
    let summary = ds.summary();
    let positives = |units: &[super::split::Unit]| -> usize {
        units
            .iter()
            .flat_map(|u| &u.stays)
            .filter(|s| ds.stay_labels.get(*s).copied().unwrap_or(false))
            .count()
    };
    Ok(Report {
        format: REPORT_FORMAT.into(),
        format_version: REPORT_VERSION,
        seed: cfg.seed,
        split_ratio: cfg.split_ratio,
        cv_folds: cfg.cv_folds,
        search_samples: cfg.search_samples,
        group_by_patient: cfg.group_by_patient,
        target_sensitivity: cfg.target_sensitivity,
        reference_precision: baseline.reference_precision,
        curve_reference_precision: baseline_curve_reference(baseline, cfg.target_sensitivity)?,
        schema_hash: schema_hash(&ds.schema),
        dataset_rows: summary.rows,
        dataset_stays: summary.stays,
        dataset_positive_stays: summary.positive_stays,
        split: SplitSummary {
            train_stays: plan.split.train_stays().len(),
            train_positive_stays: positives(&plan.split.train),
            test_stays: plan.split.test_stays().len(),
            test_positive_stays: positives(&plan.split.test),
            train_rows: plan.train_rows.len(),
            test_rows: plan.test_rows.len(),
        },
        train_stays_digest: stay_set_digest(plan.split.train_stays().iter().map(String::as_str)),
        test_stays_digest: stay_set_digest(plan.split.test_stays().iter().map(String::as_str)),
        baseline: baseline_row,
        models,
    })
}

/// Report plus the fitted pipelines, in `cfg.models` order.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub report: Report,
    pub pipelines: Vec<(ModelKind, FittedPipeline<f64>)>,
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    ds: &DayDataset,
    patient_of: Option<&BTreeMap<String, String>>,
) -> Result<Experiment> {
    let plan = plan_experiment(cfg, ds, patient_of)?;
    let baseline = braden_baseline(cfg, ds, &plan)?;
    let brow = baseline_row(cfg, &baseline)?;
    let mut models = Vec::new();
    let mut pipelines = Vec::new();
    for &kind in &cfg.models {
        let mut trained = train_kind(cfg, ds, &plan, kind, baseline.reference_precision)?;
        let pipeline = trained.pipeline.take().expect("freshly trained");
        models.push(evaluate_model(cfg, ds, &plan, &baseline, &brow, &trained, &pipeline)?);
        pipelines.push((kind, pipeline));
    }
    let report = assemble_report(cfg, ds, &plan, &baseline, brow, models)?;
    Ok(Experiment { report, pipelines })
}
