use std::collections::HashMap;

use rayon::prelude::*;

use super::spec::{validate_specs, Aggregation, FeatureSpec, OutputKind, Window, AGE_CHANNEL, SEX_CHANNEL};
use super::{DayDataset, DayExample, FeatureValue};
use crate::cohort::{CohortStore, EventValue, Stay, StayDay, BRADEN_CHANNEL};
use crate::error::{Error, Result};
use crate::time::{Timestamp, SECONDS_PER_DAY};

pub const HORIZON_DAYS: i64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSummary {
    pub rows: usize,
    pub positive_rows: usize,
    pub stays: usize,
    pub positive_stays: usize,
}

/// True iff the first stage-≥2 injury falls in `(day_start, day_end + horizon]`.
pub fn label_day(day: &StayDay, first_stage2_time: Option<Timestamp>, horizon_days: i64) -> bool {
    match first_stage2_time {
        Some(t) => t > day.day_start && t <= day.day_end.plus_days(horizon_days),
        None => false,
    }
}

/// Per-stay view of observations, grouped by channel in time order.
struct StayIndex<'a> {
    stay: &'a Stay,
    channels: HashMap<&'a str, Vec<(Timestamp, Obs<'a>)>>,
    age: Option<f64>,
    sex: Option<&'a str>,
    cutoff: Option<Timestamp>,
}

#[derive(Clone, Copy)]
enum Obs<'a> {
    Num(f64),
    Cat(&'a str),
    Flag,
}

impl<'a> StayIndex<'a> {
    fn new(store: &'a CohortStore, stay: &'a Stay) -> Self {
        let mut channels: HashMap<&str, Vec<(Timestamp, Obs)>> = HashMap::new();
        for e in &stay.events {
            let obs = match &e.value {
                EventValue::Numeric(v) => Obs::Num(*v),
                EventValue::Category(c) => Obs::Cat(c),
                EventValue::Flag => Obs::Flag,
            };
            channels.entry(e.channel.as_str()).or_default().push((e.timestamp, obs));
        }
        if !stay.braden.is_empty() {
            channels.insert(
                BRADEN_CHANNEL,
                stay.braden.iter().map(|b| (b.timestamp, Obs::Num(b.total as f64))).collect(),
            );
        }
        Self {
            stay,
            channels,
            age: store.age_at_admit(stay).map(|a| a as f64),
            sex: store.patient_of(stay).map(|p| p.sex.as_str()).filter(|s| !s.is_empty()),
            cutoff: stay.first_stage2_time(),
        }
    }

    /// Last instant whose observations the day may use.
    fn upper(&self, day: &StayDay) -> Timestamp {
        match self.cutoff {
            Some(t) => day.day_end.min(t),
            None => day.day_end,
        }
    }

    fn extract(&self, specs: &[FeatureSpec], day: &StayDay) -> Vec<FeatureValue> {
        let upper = self.upper(day);
        specs.iter().map(|spec| self.evaluate(spec, day, upper)).collect()
    }

    fn evaluate(&self, spec: &FeatureSpec, day: &StayDay, upper: Timestamp) -> FeatureValue {
        match spec.channel.as_str() {
            AGE_CHANNEL if spec.aggregation == Aggregation::Last => {
                return self.age.map_or(FeatureValue::Missing, FeatureValue::Numeric)
            }
            SEX_CHANNEL if spec.aggregation == Aggregation::Last => {
                return self
                    .sex
                    .map_or(FeatureValue::Missing, |s| FeatureValue::Category(s.to_string()))
            }
            _ => {}
        }
        let all = self
            .channels
            .get(spec.channel.as_str())
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let hi = all.partition_point(|(t, _)| *t <= upper);
        let lo = match spec.window {
            Window::SinceAdmission => 0,
            Window::Last24h => {
                let from = day.day_end.plus_seconds(-SECONDS_PER_DAY);
                all.partition_point(|(t, _)| *t <= from)
            }
        };
        let window = if lo < hi { &all[lo..hi] } else { &[][..] };
        aggregate(spec, window)
    }
}

fn aggregate(spec: &FeatureSpec, window: &[(Timestamp, Obs<'_>)]) -> FeatureValue {
    let numbers = || window.iter().filter_map(|(_, o)| match o {
        Obs::Num(v) => Some(*v),
        _ => None,
    });
    match spec.aggregation {
        Aggregation::Exists => FeatureValue::Boolean(!window.is_empty()),
        Aggregation::Count => FeatureValue::Numeric(window.len() as f64),
        Aggregation::Last => match (window.last(), spec.output_kind) {
            (None, _) => FeatureValue::Missing,
            (Some((_, Obs::Num(v))), OutputKind::Numeric) => FeatureValue::Numeric(*v),
            (Some((_, Obs::Cat(c))), OutputKind::Category) => FeatureValue::Category(c.to_string()),
            (Some((_, Obs::Num(v))), OutputKind::Category) => FeatureValue::Category(v.to_string()),
            (Some((_, Obs::Flag)), OutputKind::Boolean) => FeatureValue::Boolean(true),
            _ => FeatureValue::Missing,
        },
        Aggregation::Min => numbers().reduce(f64::min).map_or(FeatureValue::Missing, FeatureValue::Numeric),
        Aggregation::Max => numbers().reduce(f64::max).map_or(FeatureValue::Missing, FeatureValue::Numeric),
        Aggregation::Mean => {
            let (sum, n) = numbers().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n == 0 {
                FeatureValue::Missing
            } else {
                FeatureValue::Numeric(sum / n as f64)
            }
        }
    }
}

/// Evaluates every spec for one stay-day. Windows are clipped at
/// `min(day_end, first_stage2_time)`.
pub fn extract_day(store: &CohortStore, specs: &[FeatureSpec], day: &StayDay) -> Result<Vec<FeatureValue>> {
    let stay = store
        .stay(&day.stay_id)
        .ok_or_else(|| Error::Schema(format!("unknown stay `{}`", day.stay_id)))?;
    Ok(StayIndex::new(store, stay).extract(specs, day))
}

/// One labelled row per enumerated stay-day, in `(stay_id, day_index)` order.
pub fn build_dataset(store: &CohortStore, specs: &[FeatureSpec]) -> Result<DayDataset> {
    validate_specs(specs, store)?;
    let stays: Vec<&Stay> = store.stays.values().collect();
    let per_stay: Vec<Vec<DayExample>> = stays
        .par_iter()
        .map(|stay| {
            let index = StayIndex::new(store, stay);
            let cutoff = stay.first_stage2_time();
            StayDay::for_stay(stay)
                .into_iter()
                .map(|day| DayExample {
                    features: index.extract(specs, &day),
                    label: label_day(&day, cutoff, HORIZON_DAYS),
                    latest_braden: index.stay.latest_braden(index.upper(&day)),
                    stay_id: day.stay_id,
                    day_index: day.day_index,
                })
                .collect()
        })
        .collect();
    let stay_labels = stays
        .iter()
        .zip(&per_stay)
        .filter(|(_, rows)| !rows.is_empty())
        .map(|(s, _)| (s.id().to_string(), s.first_stage2_time().is_some()))
        .collect();
    Ok(DayDataset {
        schema: specs.to_vec(),
        rows: per_stay.into_iter().flatten().collect(),
        stay_labels,
    })
}
