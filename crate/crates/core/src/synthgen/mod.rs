//! Seeded synthetic cohorts with a known per-day injury hazard.
//!
//! Each stay carries one latent AR(1) state per numeric or flag channel, part
//! of which is a severity factor shared by every risk-bearing channel. The
//! day's injury hazard is `horizon_hazard_scale * sigmoid(w . z + b)`, Braden
//! totals are a noisy decreasing function of the same logit, and the true
//! 7-day incidence probability of every enumerable stay-day is written to
//! [`ORACLE_FILE`] next to the cohort files.

mod config;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::cohort::{
    write_cohort_dir, BradenReading, ClinicalEvent, CohortStore, EventValue, InjuryEvent, InjuryStage,
    PatientRecord, Stay, StayRecord, ValueKind, BRADEN_MAX, BRADEN_MIN,
};
use crate::error::{Error, Result};
use crate::featurelab::HORIZON_DAYS;
use crate::rng::{stream, Purpose};
use crate::scalar::sigmoid;
use crate::staymetrics::{collect_stay_scores, pr_curve, precision_at_sensitivity};
use crate::time::{Timestamp, SECONDS_PER_DAY};

pub use config::{default_channels, ChannelConfig, GeneratorConfig, StayLength, CARE_UNIT_PODS, CARE_UNIT_TYPES};

/// File name of the per-day true risk. The feature extractor refuses it.
pub const ORACLE_FILE: &str = "oracle.csv";

const EPOCH: &str = "2100-01-01T00:00:00Z";
const ADMISSION_SPAN_DAYS: f64 = 3.0 * 365.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub stay_id: String,
    pub day_index: u32,
    pub true_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub store: CohortStore,
    pub oracle: Vec<OracleRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateSummary {
    pub patients: usize,
    pub stays: usize,
    pub events: usize,
    pub stays_with_incidence: usize,
    pub oracle_rows: usize,
}

impl SyntheticCohort {
    pub fn summary(&self) -> GenerateSummary {
        GenerateSummary {
            patients: self.store.patients.len(),
            stays: self.store.stays.len(),
            events: self.store.event_count(),
            stays_with_incidence: self
                .store
                .stays
                .values()
                .filter(|s| s.first_stage2_time().is_some())
                .count(),
            oracle_rows: self.oracle.len(),
        }
    }
}

/// Probability of an injury within the horizon when the day's hazard holds
/// for the day and the following `HORIZON_DAYS` days.
pub fn horizon_probability(hazard: f64) -> f64 {
    let p = -((HORIZON_DAYS + 1) as f64 * (-hazard).ln_1p()).exp_m1();
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)
}

/// Builds the cohort in memory. Patients are simulated in parallel from
/// independent streams and assembled in index order.
pub fn generate_cohort(cfg: &GeneratorConfig) -> Result<SyntheticCohort> {
    cfg.validate()?;
    let base = Timestamp::parse(EPOCH).expect("valid epoch");
    let patients: Vec<PatientOut> = (0..cfg.n_patients)
        .into_par_iter()
        .map(|i| simulate_patient(cfg, i, base))
        .collect();
    let mut store = CohortStore::default();
    let mut oracle = Vec::new();
    for p in patients {
        for s in p.stays {
            store.stays.insert(s.record.stay_id.clone(), s);
        }
        oracle.extend(p.oracle);
        store.patients.insert(p.record.patient_id.clone(), p.record);
    }
    Ok(SyntheticCohort { store, oracle })
}

/// Writes `patients.csv`, `stays.csv`, `events.csv` and the oracle file into
/// `dir`. The config is validated before anything is written.
pub fn generate(cfg: &GeneratorConfig, dir: impl AsRef<Path>) -> Result<GenerateSummary> {
    let dir = dir.as_ref();
    let cohort = generate_cohort(cfg)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_cohort_dir(&cohort.store, dir)?;
    let path = dir.join(ORACLE_FILE);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_oracle(&cohort.oracle, BufWriter::new(file)).map_err(|e| Error::io(&path, e))?;
    Ok(cohort.summary())
}

pub fn write_oracle<W: Write>(rows: &[OracleRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stay_id", "day_index", "true_probability"])?;
    for r in rows {
        w.write_record([r.stay_id.as_str(), &r.day_index.to_string(), &r.true_probability.to_string()])?;
    }
    w.flush()
}

pub fn read_oracle<R: Read>(file: &str, input: R) -> Result<Vec<OracleRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(|e| malformed(file, 1, "", e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["stay_id", "day_index", "true_probability"] {
        return Err(malformed(file, 1, "", "expected header stay_id,day_index,true_probability".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| malformed(file, line, "", e.to_string()))?;
        let day_index = rec[1]
            .parse()
            .map_err(|_| malformed(file, line, "day_index", format!("`{}` is not a day index", &rec[1])))?;
        let p: f64 = rec[2]
            .parse()
            .ok()
            .filter(|p: &f64| *p > 0.0 && *p < 1.0)
            .ok_or_else(|| malformed(file, line, "true_probability", format!("`{}` is not in (0, 1)", &rec[2])))?;
        out.push(OracleRow {
            stay_id: rec[0].to_string(),
            day_index,
            true_probability: p,
        });
    }
    Ok(out)
}

pub fn read_oracle_file(path: impl AsRef<Path>) -> Result<Vec<OracleRow>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_oracle(&path.display().to_string(), f)
}

fn malformed(file: &str, line: u64, column: &str, message: String) -> Error {
    Error::Malformed {
        file: file.to_string(),
        line,
        column: column.to_string(),
        message,
    }
}

/// Reference precision at `target` sensitivity: each labelled stay is scored
/// by the maximum of its true daily probabilities and swept like any model.
/// Oracle rows of stays absent from `labels` are ignored.
pub fn oracle_best_precision_at_sensitivity(
    oracle: &[OracleRow],
    labels: &BTreeMap<String, bool>,
    target: f64,
) -> Result<f64> {
    let (stays, missing) = collect_stay_scores(
        oracle
            .iter()
            .filter(|r| labels.contains_key(&r.stay_id))
            .map(|r| (r.stay_id.as_str(), r.true_probability)),
        labels,
    )?;
    if missing > 0 {
        return Err(Error::Schema(format!("{missing} labelled stays have no oracle rows")));
    }
    if !stays.iter().any(|s| s.stay_label) {
        return Err(Error::DegenerateLabels("no positives".into()));
    }
    Ok(precision_at_sensitivity(&pr_curve(&stays)?, target)?.precision)
}

struct PatientOut {
    record: PatientRecord,
    stays: Vec<Stay>,
    oracle: Vec<OracleRow>,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

fn simulate_patient(cfg: &GeneratorConfig, index: usize, base: Timestamp) -> PatientOut {
    let mut rng = stream(cfg.seed, Purpose::Patient, index as u64);
    let patient_id = format!("P{:06}", index + 1);
    let n_stays = 1 + poisson(&mut rng, cfg.stays_per_patient - 1.0);
    let age = (cfg.age_mean + cfg.age_sd * normal(&mut rng)).clamp(cfg.age_min, cfg.age_max);
    let sex = if rng.random::<f64>() < 0.45 { "F" } else { "M" };
    let first_admit = base.plus_seconds(60 * (rng.random::<f64>() * ADMISSION_SPAN_DAYS * 1440.0) as i64);
    let birth = first_admit.plus_seconds(-((age * 365.25 * SECONDS_PER_DAY as f64) as i64)).date();

    let (mu, sigma) = cfg.stay_length.log_params();
    let length = LogNormal::new(mu, sigma).expect("valid log-normal");
    let mut admit = first_admit;
    let mut stays = Vec::new();
    let mut oracle = Vec::new();
    for k in 0..n_stays {
        let days = length
            .sample(&mut rng)
            .clamp(cfg.stay_length.min_days, cfg.stay_length.max_days);
        let minutes = ((days * 1440.0).round() as i64).max(1);
        let record = StayRecord {
            stay_id: format!("S{:06}-{}", index + 1, k + 1),
            patient_id: patient_id.clone(),
            admit_time: admit,
            discharge_time: admit.plus_seconds(60 * minutes),
        };
        let age_now = age + (admit.0 - first_admit.0) as f64 / (365.25 * SECONDS_PER_DAY as f64);
        let (stay, rows) = simulate_stay(cfg, &mut rng, record, age_now);
        admit = stay
            .record
            .discharge_time
            .plus_seconds(SECONDS_PER_DAY * rng.random_range(10..400));
        stays.push(stay);
        oracle.extend(rows);
    }
    PatientOut {
        record: PatientRecord {
            patient_id,
            birth_date: birth,
            sex: sex.to_string(),
        },
        stays,
        oracle,
    }
}

fn simulate_stay(
    cfg: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
    record: StayRecord,
    age: f64,
) -> (Stay, Vec<OracleRow>) {
    let admit = record.admit_time;
    let length = record.discharge_time.0 - admit.0;
    let n_days = (length + SECONDS_PER_DAY - 1) / SECONDS_PER_DAY;
    let charted = rng.random::<f64>() >= cfg.missing_braden_fraction;

    let share = cfg.latent_stay_share;
    let rho = cfg.latent_autocorrelation;
    let stay_level: Vec<f64> = cfg.channels.iter().map(|_| normal(rng)).collect();
    let mut ar: Vec<f64> = cfg.channels.iter().map(|_| normal(rng)).collect();
    let mut z = vec![0.0; cfg.channels.len()];
    let severity_level = normal(rng);
    let mut severity_ar = normal(rng);
    let common = cfg.severity_share;

    let mut stay = Stay::new(record);
    let mut oracle = Vec::new();
    let mut injured = false;
    for d in 0..n_days {
        let day_start = admit.plus_seconds(d * SECONDS_PER_DAY);
        let day_len = SECONDS_PER_DAY.min(length - d * SECONDS_PER_DAY);
        let fraction = day_len as f64 / SECONDS_PER_DAY as f64;
        let mut shift = 0.0;
        if d > 0 {
            severity_ar = rho * severity_ar + (1.0 - rho * rho).sqrt() * normal(rng);
        }
        let severity = share.sqrt() * severity_level + (1.0 - share).sqrt() * severity_ar;
        for j in 0..z.len() {
            if d > 0 {
                ar[j] = rho * ar[j] + (1.0 - rho * rho).sqrt() * normal(rng);
            }
            z[j] = share.sqrt() * stay_level[j] + (1.0 - share).sqrt() * ar[j];
            let w = cfg.channels[j].risk_weight;
            if w != 0.0 {
                z[j] = common.sqrt() * w.signum() * severity + (1.0 - common).sqrt() * z[j];
            }
            shift += cfg.channels[j].risk_weight * z[j];
        }
        shift += cfg.age_risk_weight * (age - 65.0) / 15.0;
        let logit = cfg.risk_intercept + shift;
        let hazard = cfg.horizon_hazard_scale * sigmoid(logit);

        for (c, &zj) in cfg.channels.iter().zip(&z) {
            emit_channel(c, zj, d == 0, day_start, day_len, fraction, rng, &mut stay.events);
        }
        if charted {
            let at = day_start.plus_seconds(rng.random_range(0..day_len.min(6 * 3600)));
            let raw = cfg.braden_center - cfg.braden_slope * shift + cfg.braden_noise_sd * normal(rng);
            let total = raw.round().clamp(BRADEN_MIN as f64, BRADEN_MAX as f64) as u8;
            stay.braden.push(BradenReading::new(at, total, None).expect("total in range"));
        }
        for _ in 0..poisson(rng, cfg.stage1_rate * fraction) {
            let at = day_start.plus_seconds(rng.random_range(0..day_len));
            stay.injuries.push(InjuryEvent { timestamp: at, stage: InjuryStage::Stage(1) });
        }
        if !injured {
            oracle.push(OracleRow {
                stay_id: stay.record.stay_id.clone(),
                day_index: d as u32,
                true_probability: horizon_probability(hazard),
            });
            if rng.random::<f64>() < hazard && day_len > 1 {
                injured = true;
                let at = day_start.plus_seconds(rng.random_range(1..day_len));
                let stage = match rng.random_range(0..20) {
                    0..=12 => InjuryStage::Stage(2),
                    13..=15 => InjuryStage::Stage(3),
                    16 => InjuryStage::Stage(4),
                    17..=18 => InjuryStage::Unstageable,
                    _ => InjuryStage::DeepTissue,
                };
                stay.injuries.push(InjuryEvent { timestamp: at, stage });
            }
        }
    }
    stay.sort();
    (stay, oracle)
}

#[allow(clippy::too_many_arguments)]
fn emit_channel(
    c: &ChannelConfig,
    z: f64,
    first_day: bool,
    day_start: Timestamp,
    day_len: i64,
    fraction: f64,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<ClinicalEvent>,
) {
    let mut push = |at: Timestamp, value: EventValue| {
        out.push(ClinicalEvent {
            timestamp: at,
            channel: c.name.clone(),
            value,
        })
    };
    match c.kind {
        ValueKind::Numeric => {
            let scale = 10f64.powi(c.decimals as i32);
            for _ in 0..poisson(rng, c.events_per_day * fraction) {
                let at = day_start.plus_seconds(rng.random_range(0..day_len));
                let mut v = c.mean + c.sd * z + c.noise_sd * normal(rng);
                if let Some(lo) = c.min {
                    v = v.max(lo);
                }
                if let Some(hi) = c.max {
                    v = v.min(hi);
                }
                push(at, EventValue::Numeric((v * scale).round() / scale));
            }
        }
        ValueKind::Flag => {
            for _ in 0..poisson(rng, c.events_per_day * fraction * (c.sd * z).exp()) {
                let at = day_start.plus_seconds(rng.random_range(0..day_len));
                push(at, EventValue::Flag);
            }
        }
        ValueKind::Category => {
            if c.events_per_day <= 0.0 {
                return;
            }
            if first_day {
                let v = c.categories[rng.random_range(0..c.categories.len())].clone();
                push(day_start, EventValue::Category(v));
            }
            for _ in 0..poisson(rng, c.events_per_day * fraction) {
                let at = day_start.plus_seconds(rng.random_range(0..day_len));
                let v = c.categories[rng.random_range(0..c.categories.len())].clone();
                push(at, EventValue::Category(v));
            }
        }
    }
}
