//! Cohort ingestion, filtering and stay-day enumeration.
//!
//! A cohort is three CSV files (`patients.csv`, `stays.csv`, `events.csv`).
//! Pressure-injury stagings and Braden totals travel in the event stream on
//! the reserved channels [`INJURY_CHANNEL`] and [`BRADEN_CHANNEL`].

mod days;
mod filter;
mod ingest;
mod write;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

pub use days::{enumerate_stay_days, StayDay};
pub use filter::{apply_filters, FilterReport, MIN_AGE_YEARS};
pub use ingest::{ingest, ingest_dir, ingest_from, CohortPaths, IngestReport};
pub use write::{write_cohort, write_cohort_dir};

pub const INJURY_CHANNEL: &str = "pressure_injury_stage";
pub const BRADEN_CHANNEL: &str = "braden_total";
pub const BRADEN_MIN: u8 = 6;
pub const BRADEN_MAX: u8 = 23;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientRecord {
    pub patient_id: String,
    pub birth_date: NaiveDate,
    pub sex: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StayRecord {
    pub stay_id: String,
    pub patient_id: String,
    pub admit_time: Timestamp,
    pub discharge_time: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Numeric,
    Category,
    Flag,
}

impl ValueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::Numeric => "numeric",
            ValueKind::Category => "category",
            ValueKind::Flag => "flag",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "numeric" => Some(ValueKind::Numeric),
            "category" => Some(ValueKind::Category),
            "flag" => Some(ValueKind::Flag),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventValue {
    Numeric(f64),
    Category(String),
    Flag,
}

impl EventValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            EventValue::Numeric(_) => ValueKind::Numeric,
            EventValue::Category(_) => ValueKind::Category,
            EventValue::Flag => ValueKind::Flag,
        }
    }

    pub fn as_numeric(&self) -> Option<f64> {
        match self {
            EventValue::Numeric(v) => Some(*v),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            EventValue::Numeric(v) => v.to_string(),
            EventValue::Category(c) => c.clone(),
            EventValue::Flag => "true".to_string(),
        }
    }
}

/// A timestamped observation on a named channel. The owning stay is implied
/// by the [`Stay`] that holds it.
#[derive(Debug, Clone, PartialEq)]
pub struct ClinicalEvent {
    pub timestamp: Timestamp,
    pub channel: String,
    pub value: EventValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InjuryStage {
    Stage(u8),
    Unstageable,
    DeepTissue,
}

impl InjuryStage {
    pub fn parse(kind: ValueKind, value: &str) -> Option<Self> {
        match kind {
            ValueKind::Numeric => {
                let v: f64 = value.trim().parse().ok()?;
                if v.fract() == 0.0 && (1.0..=4.0).contains(&v) {
                    Some(InjuryStage::Stage(v as u8))
                } else {
                    None
                }
            }
            ValueKind::Category => match value.trim() {
                "unstageable" => Some(InjuryStage::Unstageable),
                "deep_tissue" => Some(InjuryStage::DeepTissue),
                _ => None,
            },
            ValueKind::Flag => None,
        }
    }

    /// Unstageable and deep-tissue injuries count as stage 2 or worse.
    pub fn is_stage2_or_worse(self) -> bool {
        match self {
            InjuryStage::Stage(s) => s >= 2,
            InjuryStage::Unstageable | InjuryStage::DeepTissue => true,
        }
    }

    fn as_event_value(self) -> EventValue {
        match self {
            InjuryStage::Stage(s) => EventValue::Numeric(s as f64),
            InjuryStage::Unstageable => EventValue::Category("unstageable".into()),
            InjuryStage::DeepTissue => EventValue::Category("deep_tissue".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InjuryEvent {
    pub timestamp: Timestamp,
    pub stage: InjuryStage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BradenReading {
    pub timestamp: Timestamp,
    pub total: u8,
    pub subscores: Option<[u8; 6]>,
}

impl BradenReading {
    pub fn new(timestamp: Timestamp, total: u8, subscores: Option<[u8; 6]>) -> Option<Self> {
        if !(BRADEN_MIN..=BRADEN_MAX).contains(&total) {
            return None;
        }
        if let Some(s) = subscores {
            if s.iter().map(|&v| v as u32).sum::<u32>() != total as u32 {
                return None;
            }
        }
        Some(Self {
            timestamp,
            total,
            subscores,
        })
    }
}

/// One stay with all of its observations, each list in canonical time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Stay {
    pub record: StayRecord,
    pub events: Vec<ClinicalEvent>,
    pub injuries: Vec<InjuryEvent>,
    pub braden: Vec<BradenReading>,
}

impl Stay {
    pub fn new(record: StayRecord) -> Self {
        Self {
            record,
            events: Vec::new(),
            injuries: Vec::new(),
            braden: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.record.stay_id
    }

    /// Earliest stage-≥2 injury, if any.
    pub fn first_stage2_time(&self) -> Option<Timestamp> {
        self.injuries
            .iter()
            .filter(|i| i.stage.is_stage2_or_worse())
            .map(|i| i.timestamp)
            .min()
    }

    /// Most recent Braden total with timestamp ≤ `at`.
    pub fn latest_braden(&self, at: Timestamp) -> Option<u8> {
        let idx = self.braden.partition_point(|r| r.timestamp <= at);
        idx.checked_sub(1).map(|i| self.braden[i].total)
    }

    /// Puts every list in the order the cohort writer emits, so ties at one
    /// timestamp survive a write and re-ingest unchanged.
    pub(crate) fn sort(&mut self) {
        self.events
            .sort_by_cached_key(|e| (e.timestamp, e.channel.clone(), e.value.kind().as_str(), e.value.render()));
        self.injuries
            .sort_by_cached_key(|i| (i.timestamp, i.stage.as_event_value().render()));
        self.braden
            .sort_by_cached_key(|b| (b.timestamp, EventValue::Numeric(b.total as f64).render()));
    }
}

/// Immutable in-memory cohort, keyed and ordered by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CohortStore {
    pub patients: BTreeMap<String, PatientRecord>,
    pub stays: BTreeMap<String, Stay>,
}

impl CohortStore {
    pub fn patient_of(&self, stay: &Stay) -> Option<&PatientRecord> {
        self.patients.get(&stay.record.patient_id)
    }

    pub fn event_count(&self) -> usize {
        self.stays.values().map(|s| s.events.len()).sum()
    }

    pub fn stay(&self, stay_id: &str) -> Option<&Stay> {
        self.stays.get(stay_id)
    }

    /// Age in whole years at admission.
    pub fn age_at_admit(&self, stay: &Stay) -> Option<i32> {
        self.patient_of(stay)
            .map(|p| crate::time::whole_years(p.birth_date, stay.record.admit_time.date()))
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::time::parse_date;

    pub fn ts(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    pub fn stay(id: &str, patient: &str, admit: Timestamp, hours: i64) -> Stay {
        Stay::new(StayRecord {
            stay_id: id.into(),
            patient_id: patient.into(),
            admit_time: admit,
            discharge_time: admit.plus_seconds(hours * 3600),
        })
    }

    pub fn patient(id: &str, birth: &str) -> PatientRecord {
        PatientRecord {
            patient_id: id.into(),
            birth_date: parse_date(birth).unwrap(),
            sex: "F".into(),
        }
    }

    pub fn store(patients: Vec<PatientRecord>, stays: Vec<Stay>) -> CohortStore {
        CohortStore {
            patients: patients.into_iter().map(|p| (p.patient_id.clone(), p)).collect(),
            stays: stays.into_iter().map(|s| (s.record.stay_id.clone(), s)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unstageable_and_deep_tissue_trigger() {
        assert!(!InjuryStage::Stage(1).is_stage2_or_worse());
        assert!(InjuryStage::Stage(2).is_stage2_or_worse());
        assert!(InjuryStage::Unstageable.is_stage2_or_worse());
        assert!(InjuryStage::DeepTissue.is_stage2_or_worse());
        assert_eq!(InjuryStage::parse(ValueKind::Numeric, "5"), None);
        assert_eq!(InjuryStage::parse(ValueKind::Numeric, "2.5"), None);
        assert_eq!(
            InjuryStage::parse(ValueKind::Category, "deep_tissue"),
            Some(InjuryStage::DeepTissue)
        );
    }

    #[test]
    fn braden_reading_validates_range_and_subscores() {
        let t = Timestamp(0);
        assert!(BradenReading::new(t, 5, None).is_none());
        assert!(BradenReading::new(t, 24, None).is_none());
        assert!(BradenReading::new(t, 18, Some([3, 3, 3, 3, 3, 3])).is_some());
        assert!(BradenReading::new(t, 17, Some([3, 3, 3, 3, 3, 3])).is_none());
    }
}
