use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cohort::{ValueKind, BRADEN_CHANNEL, INJURY_CHANNEL};
use crate::error::{Error, Result};
use crate::featurelab::{AGE_CHANNEL, SEX_CHANNEL};

/// Log-normal stay length, parameterised by its mean and standard deviation in days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StayLength {
    pub mean_days: f64,
    pub sd_days: f64,
    pub min_days: f64,
    pub max_days: f64,
}

impl StayLength {
    /// `(mu, sigma)` of the underlying normal.
    pub fn log_params(&self) -> (f64, f64) {
        let s2 = (1.0 + (self.sd_days / self.mean_days).powi(2)).ln();
        (self.mean_days.ln() - s2 / 2.0, s2.sqrt())
    }
}

/// One simulated event channel.
///
/// Numeric channels observe `mean + sd * z + noise_sd * e` with `z` the
/// channel's latent state. Flag channels fire at `events_per_day * exp(sd * z)`.
/// Category channels record a value at admission whenever their rate is
/// positive, then change at `events_per_day`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub name: String,
    pub kind: ValueKind,
    pub events_per_day: f64,
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub sd: f64,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub decimals: u32,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default)]
    pub categories: Vec<String>,
    /// Contribution of the latent state to the injury logit.
    #[serde(default)]
    pub risk_weight: f64,
}

impl ChannelConfig {
    #[allow(clippy::too_many_arguments)]
    fn numeric(name: &str, rate: f64, mean: f64, sd: f64, noise_sd: f64, decimals: u32, range: (f64, f64), w: f64) -> Self {
        Self {
            name: name.into(),
            kind: ValueKind::Numeric,
            events_per_day: rate,
            mean,
            sd,
            noise_sd,
            decimals,
            min: Some(range.0),
            max: Some(range.1),
            categories: Vec::new(),
            risk_weight: w,
        }
    }

    fn flag(name: &str, rate: f64, sd: f64, w: f64) -> Self {
        Self {
            name: name.into(),
            kind: ValueKind::Flag,
            events_per_day: rate,
            mean: 0.0,
            sd,
            noise_sd: 0.0,
            decimals: 0,
            min: None,
            max: None,
            categories: Vec::new(),
            risk_weight: w,
        }
    }

    fn category(name: &str, rate: f64, categories: Vec<String>) -> Self {
        Self {
            name: name.into(),
            kind: ValueKind::Category,
            events_per_day: rate,
            mean: 0.0,
            sd: 0.0,
            noise_sd: 0.0,
            decimals: 0,
            min: None,
            max: None,
            categories,
            risk_weight: 0.0,
        }
    }
}

pub const CARE_UNIT_TYPES: [&str; 5] = ["CCU", "CSRU", "MICU", "SICU", "TSICU"];
pub const CARE_UNIT_PODS: [char; 7] = ['A', 'B', 'C', 'D', 'E', 'F', 'G'];

pub fn default_channels() -> Vec<ChannelConfig> {
    use ChannelConfig as C;
    let care_units = CARE_UNIT_TYPES
        .iter()
        .flat_map(|t| CARE_UNIT_PODS.iter().map(move |p| format!("{t}-{p}")))
        .collect();
    vec![
        C::numeric("heart_rate", 6.0, 88.0, 14.0, 6.0, 0, (25.0, 220.0), 0.27),
        C::numeric("resp_rate", 6.0, 19.0, 4.0, 2.0, 0, (4.0, 60.0), 0.18),
        C::numeric("sys_bp", 6.0, 120.0, 18.0, 8.0, 0, (50.0, 230.0), -0.24),
        C::numeric("dia_bp", 6.0, 62.0, 11.0, 6.0, 0, (25.0, 140.0), 0.0),
        C::numeric("mean_bp", 6.0, 80.0, 12.0, 6.0, 0, (30.0, 170.0), -0.15),
        C::numeric("temperature", 4.0, 37.0, 0.6, 0.3, 1, (33.0, 42.0), 0.09),
        C::numeric("spo2", 6.0, 96.5, 2.0, 1.0, 0, (60.0, 100.0), -0.18),
        C::numeric("gcs_total", 3.0, 12.0, 2.6, 0.8, 0, (3.0, 15.0), -0.36),
        C::numeric("fio2", 3.0, 0.45, 0.12, 0.04, 2, (0.21, 1.0), 0.15),
        C::numeric("glucose", 3.0, 135.0, 30.0, 15.0, 0, (40.0, 500.0), 0.0),
        C::numeric("urine_output", 5.0, 120.0, 45.0, 30.0, 0, (0.0, 600.0), -0.12),
        C::numeric("weight", 0.7, 80.0, 16.0, 1.5, 1, (35.0, 220.0), 0.024),
        C::numeric("hemoglobin", 1.0, 10.6, 1.7, 0.4, 1, (4.0, 18.0), -0.024),
        C::numeric("albumin", 0.6, 3.0, 0.6, 0.15, 1, (1.0, 5.5), -0.06),
        C::numeric("creatinine", 1.0, 1.3, 0.6, 0.15, 2, (0.2, 10.0), 0.018),
        C::numeric("wbc", 1.0, 11.0, 4.0, 1.2, 1, (0.5, 60.0), 0.012),
        C::numeric("lactate", 0.8, 2.0, 1.0, 0.3, 1, (0.3, 20.0), 0.042),
        C::numeric("platelets", 1.0, 220.0, 80.0, 20.0, 0, (5.0, 900.0), 0.0),
        C::flag("vasopressor", 1.2, 1.2, 0.054),
        C::flag("ventilation", 1.5, 1.2, 0.066),
        C::flag("surgery", 0.08, 0.8, 0.024),
        C::flag("transfer", 0.1, 0.3, 0.0),
        C::category(
            "admission_type",
            0.01,
            vec!["ELECTIVE".into(), "EMERGENCY".into(), "URGENT".into()],
        ),
        C::category("care_unit", 0.08, care_units),
    ]
}

/// Synthetic cohort generator settings. Every field has a default, so a
/// config file only needs the values it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_patients: usize,
    pub seed: u64,
    /// Mean stays per patient; extra stays beyond the first are Poisson.
    pub stays_per_patient: f64,
    pub stay_length: StayLength,
    pub age_mean: f64,
    pub age_sd: f64,
    pub age_min: f64,
    pub age_max: f64,
    /// Fraction of stays with no Braden charting at all.
    pub missing_braden_fraction: f64,
    /// Share of latent variance that is constant over a stay.
    pub latent_stay_share: f64,
    /// Day-to-day autocorrelation of the remaining latent component.
    pub latent_autocorrelation: f64,
    /// Share of each risk-bearing channel's latent variance that comes from
    /// one shared severity factor, signed by the channel's risk weight.
    pub severity_share: f64,
    pub risk_intercept: f64,
    /// Weight of standardised age `(age - 65) / 15` in the injury logit.
    pub age_risk_weight: f64,
    pub horizon_hazard_scale: f64,
    pub braden_center: f64,
    pub braden_slope: f64,
    pub braden_noise_sd: f64,
    /// Daily rate of stage-1 stagings, which do not count as incidence.
    pub stage1_rate: f64,
    #[serde(rename = "channel")]
    pub channels: Vec<ChannelConfig>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_patients: 2000,
            seed: 42,
            stays_per_patient: 1.33,
            stay_length: StayLength {
                mean_days: 4.3,
                sd_days: 4.5,
                min_days: 0.25,
                max_days: 60.0,
            },
            age_mean: 64.0,
            age_sd: 17.0,
            age_min: 16.0,
            age_max: 95.0,
            missing_braden_fraction: 0.01,
            latent_stay_share: 0.6,
            latent_autocorrelation: 0.7,
            severity_share: 0.7,
            risk_intercept: -4.6,
            age_risk_weight: 0.16,
            horizon_hazard_scale: 0.5,
            braden_center: 15.0,
            braden_slope: 1.3,
            braden_noise_sd: 3.0,
            stage1_rate: 0.02,
            channels: default_channels(),
        }
    }
}

impl GeneratorConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("generator config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_patients == 0 {
            return bad("n_patients must be positive".into());
        }
        let positive = [
            ("stay_length.mean_days", self.stay_length.mean_days),
            ("stay_length.sd_days", self.stay_length.sd_days),
            ("stay_length.min_days", self.stay_length.min_days),
            ("braden_noise_sd", self.braden_noise_sd),
            ("horizon_hazard_scale", self.horizon_hazard_scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be a positive number, got {v}"));
            }
        }
        if self.stay_length.max_days < self.stay_length.min_days {
            return bad("stay_length.max_days is below min_days".into());
        }
        if self.horizon_hazard_scale > 1.0 {
            return bad("horizon_hazard_scale must not exceed 1".into());
        }
        if !(self.stays_per_patient >= 1.0 && self.stays_per_patient.is_finite()) {
            return bad("stays_per_patient must be at least 1".into());
        }
        if !(self.age_min <= self.age_max && self.age_sd >= 0.0) {
            return bad("age range is empty or age_sd is negative".into());
        }
        for (name, v) in [
            ("missing_braden_fraction", self.missing_braden_fraction),
            ("latent_stay_share", self.latent_stay_share),
            ("severity_share", self.severity_share),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.latent_autocorrelation) {
            return bad("latent_autocorrelation must lie in [0, 1)".into());
        }
        if self.stage1_rate.is_nan() || self.stage1_rate < 0.0 {
            return bad("stage1_rate must be non-negative".into());
        }
        for v in [self.risk_intercept, self.age_risk_weight, self.braden_center, self.braden_slope] {
            if !v.is_finite() {
                return bad("risk and Braden parameters must be finite".into());
            }
        }
        let mut names = BTreeSet::new();
        for c in &self.channels {
            let reserved = [INJURY_CHANNEL, BRADEN_CHANNEL, AGE_CHANNEL, SEX_CHANNEL];
            if reserved.contains(&c.name.as_str()) || c.name.is_empty() {
                return bad(format!("channel name `{}` is reserved or empty", c.name));
            }
            if !names.insert(c.name.as_str()) {
                return bad(format!("channel `{}` is listed twice", c.name));
            }
            if !(c.events_per_day >= 0.0 && c.events_per_day.is_finite()) {
                return bad(format!("channel `{}`: events_per_day must be non-negative", c.name));
            }
            if !(c.sd >= 0.0 && c.noise_sd >= 0.0 && c.risk_weight.is_finite() && c.mean.is_finite()) {
                return bad(format!("channel `{}`: spreads must be non-negative", c.name));
            }
            if let (Some(lo), Some(hi)) = (c.min, c.max) {
                if lo > hi {
                    return bad(format!("channel `{}`: min exceeds max", c.name));
                }
            }
            if c.kind == ValueKind::Category && c.categories.is_empty() {
                return bad(format!("channel `{}`: category channels need categories", c.name));
            }
            if c.kind != ValueKind::Category && !c.categories.is_empty() {
                return bad(format!("channel `{}`: only category channels take categories", c.name));
            }
        }
        Ok(())
    }
}
