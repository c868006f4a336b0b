//! Windowed feature extraction and 7-day-horizon labelling.

mod extract;
mod io;
mod spec;

use std::collections::BTreeMap;

pub use extract::{build_dataset, extract_day, label_day, DatasetSummary, HORIZON_DAYS};
pub use io::{ensure_not_oracle, read_dataset, read_dataset_file, write_dataset};
pub use spec::{
    default_specs, load_specs, parse_specs, validate_specs, Aggregation, FeatureSpec, OutputKind,
    Window, AGE_CHANNEL, SEX_CHANNEL,
};

/// One extracted feature value.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    Numeric(f64),
    Boolean(bool),
    Category(String),
    Missing,
}

impl FeatureValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, FeatureValue::Missing)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayExample {
    pub stay_id: String,
    pub day_index: u32,
    pub features: Vec<FeatureValue>,
    pub label: bool,
    pub latest_braden: Option<u8>,
}

/// Ordered day rows sharing one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct DayDataset {
    pub schema: Vec<FeatureSpec>,
    pub rows: Vec<DayExample>,
    /// Positive iff the stay has a stage-≥2 injury.
    pub stay_labels: BTreeMap<String, bool>,
}

impl DayDataset {
    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            rows: self.rows.len(),
            positive_rows: self.rows.iter().filter(|r| r.label).count(),
            stays: self.stay_labels.len(),
            positive_stays: self.stay_labels.values().filter(|&&l| l).count(),
        }
    }

    /// Row indices grouped by stay, in row order.
    pub fn rows_by_stay(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut out: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            out.entry(r.stay_id.as_str()).or_default().push(i);
        }
        out
    }
}
