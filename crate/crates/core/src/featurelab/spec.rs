use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cohort::{CohortStore, ValueKind, BRADEN_CHANNEL, INJURY_CHANNEL};
use crate::error::{Error, Result};

/// Static channel resolved from the patient's age at admission.
pub const AGE_CHANNEL: &str = "age";
/// Static channel resolved from the patient record.
pub const SEX_CHANNEL: &str = "sex";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[serde(rename = "last_24h")]
    Last24h,
    SinceAdmission,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Last,
    Min,
    Max,
    Mean,
    Count,
    Exists,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Numeric,
    Boolean,
    Category,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    pub channel: String,
    pub window: Window,
    pub aggregation: Aggregation,
    pub output_kind: OutputKind,
}

impl FeatureSpec {
    pub fn new(
        name: impl Into<String>,
        channel: impl Into<String>,
        window: Window,
        aggregation: Aggregation,
        output_kind: OutputKind,
    ) -> Self {
        Self {
            name: name.into(),
            channel: channel.into(),
            window,
            aggregation,
            output_kind,
        }
    }

    fn check_shape(&self) -> Result<()> {
        use Aggregation::*;
        let ok = match (self.aggregation, self.output_kind) {
            (Exists, OutputKind::Boolean) => true,
            (Exists, _) | (_, OutputKind::Boolean) => false,
            (Min | Max | Mean | Count, OutputKind::Numeric) => true,
            (Last, _) => true,
            _ => false,
        };
        if !ok {
            return Err(Error::Schema(format!(
                "feature `{}`: aggregation {:?} cannot produce {:?}",
                self.name, self.aggregation, self.output_kind
            )));
        }
        if self.channel.is_empty() {
            return Err(Error::Schema(format!("feature `{}`: empty channel", self.name)));
        }
        if self.channel == INJURY_CHANNEL {
            return Err(Error::Schema(format!(
                "feature `{}`: the injury channel is the outcome and cannot be a feature",
                self.name
            )));
        }
        Ok(())
    }

    /// Value kind expected on the channel, when the spec constrains it.
    fn required_channel_kind(&self) -> Option<ValueKind> {
        match (self.aggregation, self.output_kind) {
            (Aggregation::Min | Aggregation::Max | Aggregation::Mean, _) => Some(ValueKind::Numeric),
            (Aggregation::Last, OutputKind::Numeric) => Some(ValueKind::Numeric),
            (Aggregation::Last, OutputKind::Category) => Some(ValueKind::Category),
            _ => None,
        }
    }
}

/// Checks spec shapes, name uniqueness, and channel kinds observed in `store`.
pub fn validate_specs(specs: &[FeatureSpec], store: &CohortStore) -> Result<()> {
    let mut names = std::collections::HashSet::new();
    for s in specs {
        s.check_shape()?;
        if !names.insert(s.name.as_str()) {
            return Err(Error::Schema(format!("duplicate feature name `{}`", s.name)));
        }
    }
    let mut observed: HashMap<&str, ValueKind> = HashMap::new();
    for stay in store.stays.values() {
        for e in &stay.events {
            let kind = e.value.kind();
            if let Some(prev) = observed.insert(e.channel.as_str(), kind) {
                if prev != kind {
                    return Err(Error::Schema(format!(
                        "channel `{}` carries both {} and {} values",
                        e.channel,
                        prev.as_str(),
                        kind.as_str()
                    )));
                }
            }
        }
    }
    observed.insert(BRADEN_CHANNEL, ValueKind::Numeric);
    observed.insert(AGE_CHANNEL, ValueKind::Numeric);
    observed.insert(SEX_CHANNEL, ValueKind::Category);
    for s in specs {
        if let (Some(need), Some(&have)) = (s.required_channel_kind(), observed.get(s.channel.as_str())) {
            if need != have {
                return Err(Error::Schema(format!(
                    "feature `{}`: {:?} needs {} values but channel `{}` is {}",
                    s.name,
                    s.aggregation,
                    need.as_str(),
                    s.channel,
                    have.as_str()
                )));
            }
        }
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    feature: Vec<FeatureSpec>,
}

/// Parses a TOML list of `[[feature]]` tables.
pub fn parse_specs(text: &str) -> Result<Vec<FeatureSpec>> {
    let file: SpecFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    for s in &file.feature {
        s.check_shape()?;
    }
    Ok(file.feature)
}

pub fn load_specs(path: impl AsRef<Path>) -> Result<Vec<FeatureSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_specs(&text).map_err(|e| e.context(path.display().to_string()))
}

pub const VITAL_CHANNELS: [&str; 12] = [
    "heart_rate",
    "resp_rate",
    "sys_bp",
    "dia_bp",
    "mean_bp",
    "temperature",
    "spo2",
    "gcs_total",
    "fio2",
    "glucose",
    "urine_output",
    "weight",
];

pub const LAB_CHANNELS: [&str; 6] = [
    "hemoglobin",
    "albumin",
    "creatinine",
    "wbc",
    "lactate",
    "platelets",
];

/// The shipped 40-feature roster: 24 vital summaries, 6 labs, 4 flags and
/// 6 demographic/administrative/Braden features.
pub fn default_specs() -> Vec<FeatureSpec> {
    use Aggregation::*;
    use OutputKind::*;
    use Window::*;
    let mut out = Vec::with_capacity(40);
    for ch in VITAL_CHANNELS {
        out.push(FeatureSpec::new(format!("{ch}_mean_24h"), ch, Last24h, Mean, Numeric));
        out.push(FeatureSpec::new(format!("{ch}_min_24h"), ch, Last24h, Min, Numeric));
    }
    for ch in LAB_CHANNELS {
        out.push(FeatureSpec::new(format!("{ch}_last"), ch, SinceAdmission, Last, Numeric));
    }
    out.push(FeatureSpec::new("vasopressor_24h", "vasopressor", Last24h, Exists, Boolean));
    out.push(FeatureSpec::new("ventilation_24h", "ventilation", Last24h, Exists, Boolean));
    out.push(FeatureSpec::new("surgery_since_admit", "surgery", SinceAdmission, Exists, Boolean));
    out.push(FeatureSpec::new("transfer_since_admit", "transfer", SinceAdmission, Exists, Boolean));
    out.push(FeatureSpec::new("age", AGE_CHANNEL, SinceAdmission, Last, Numeric));
    out.push(FeatureSpec::new("sex", SEX_CHANNEL, SinceAdmission, Last, Category));
    out.push(FeatureSpec::new("admission_type", "admission_type", SinceAdmission, Last, Category));
    out.push(FeatureSpec::new("care_unit", "care_unit", SinceAdmission, Last, Category));
    out.push(FeatureSpec::new("braden_last", BRADEN_CHANNEL, SinceAdmission, Last, Numeric));
    out.push(FeatureSpec::new("braden_min", BRADEN_CHANNEL, SinceAdmission, Min, Numeric));
    out
}
