//! Robust preprocessing fitted on training rows only.
//!
//! * numeric: impute the median, then `(x - median) / (q3 - q1)`; an IQR of 0
//!   divides by 1.
//! * boolean: missing is `false`.
//! * category: one-hot over the training vocabulary (sorted) plus a trailing
//!   `None` column for missing values. Values unseen in training encode as all
//!   zeros.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurelab::{FeatureSpec, FeatureValue, OutputKind};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnParams {
    Numeric { name: String, median: f64, q1: f64, q3: f64 },
    Boolean { name: String },
    Category { name: String, vocabulary: Vec<String> },
}

impl ColumnParams {
    pub fn name(&self) -> &str {
        match self {
            ColumnParams::Numeric { name, .. }
            | ColumnParams::Boolean { name }
            | ColumnParams::Category { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            ColumnParams::Category { vocabulary, .. } => vocabulary.len() + 1,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPreprocessor {
    pub schema_hash: String,
    pub columns: Vec<ColumnParams>,
}

/// Median and Tukey hinges (medians of the lower and upper halves, each half
/// including the median when the count is odd). `values` must be sorted.
pub fn tukey_hinges(values: &[f64]) -> Option<(f64, f64, f64)> {
    fn median(v: &[f64]) -> f64 {
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    }
    let n = values.len();
    if n == 0 {
        return None;
    }
    let half = n.div_ceil(2);
    Some((median(&values[..half]), median(values), median(&values[n - half..])))
}

impl FittedPreprocessor {
    /// Returns the fitted preprocessor and any warnings (features with no
    /// observed value get median 0 and IQR 1).
    pub fn fit<'a>(
        schema: &[FeatureSpec],
        rows: impl IntoIterator<Item = &'a [FeatureValue]> + Clone,
    ) -> Result<(Self, Vec<String>)> {
        let mut warnings = Vec::new();
        let mut columns = Vec::with_capacity(schema.len());
        let n_rows = rows.clone().into_iter().count();
        if n_rows == 0 {
            return Err(Error::Schema("cannot fit a preprocessor on zero rows".into()));
        }
        for (j, spec) in schema.iter().enumerate() {
            let column = rows.clone().into_iter().map(|r| &r[j]);
            let params = match spec.output_kind {
                OutputKind::Numeric => {
                    let mut vals: Vec<f64> = column
                        .filter_map(|v| match v {
                            FeatureValue::Numeric(x) => Some(*x),
                            _ => None,
                        })
                        .collect();
                    vals.sort_by(f64::total_cmp);
                    match tukey_hinges(&vals) {
                        Some((q1, median, q3)) => ColumnParams::Numeric { name: spec.name.clone(), median, q1, q3 },
                        None => {
                            warnings.push(format!("feature `{}` has no observed values", spec.name));
                            ColumnParams::Numeric { name: spec.name.clone(), median: 0.0, q1: -0.5, q3: 0.5 }
                        }
                    }
                }
                OutputKind::Boolean => ColumnParams::Boolean { name: spec.name.clone() },
                OutputKind::Category => {
                    let mut vocabulary: Vec<String> = column
                        .filter_map(|v| match v {
                            FeatureValue::Category(c) => Some(c.clone()),
                            _ => None,
                        })
                        .collect();
                    vocabulary.sort();
                    vocabulary.dedup();
                    ColumnParams::Category { name: spec.name.clone(), vocabulary }
                }
            };
            columns.push(params);
        }
        Ok((
            Self {
                schema_hash: super::schema_hash(schema),
                columns,
            },
            warnings,
        ))
    }

    pub fn output_width(&self) -> usize {
        self.columns.iter().map(ColumnParams::width).sum()
    }

    pub fn output_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.output_width());
        for c in &self.columns {
            match c {
                ColumnParams::Category { name, vocabulary } => {
                    out.extend(vocabulary.iter().map(|v| format!("{name}={v}")));
                    out.push(format!("{name}=None"));
                }
                other => out.push(other.name().to_string()),
            }
        }
        out
    }

    pub fn transform<T: Scalar>(&self, row: &[FeatureValue]) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(self.output_width());
        self.transform_into(row, &mut out)?;
        Ok(out)
    }

    pub fn transform_into<T: Scalar>(&self, row: &[FeatureValue], out: &mut Vec<T>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Schema(format!(
                "row has {} values, preprocessor expects {}",
                row.len(),
                self.columns.len()
            )));
        }
        for (c, v) in self.columns.iter().zip(row) {
            match (c, v) {
                (ColumnParams::Numeric { median, q1, q3, .. }, FeatureValue::Numeric(_) | FeatureValue::Missing) => {
                    let x = match v {
                        FeatureValue::Numeric(x) => *x,
                        _ => *median,
                    };
                    let iqr = q3 - q1;
                    let scale = if iqr > 0.0 { iqr } else { 1.0 };
                    out.push(T::of((x - median) / scale));
                }
                (ColumnParams::Boolean { .. }, FeatureValue::Boolean(b)) => {
                    out.push(if *b { T::one() } else { T::zero() })
                }
                (ColumnParams::Boolean { .. }, FeatureValue::Missing) => out.push(T::zero()),
                (ColumnParams::Category { vocabulary, .. }, FeatureValue::Category(_) | FeatureValue::Missing) => {
                    let hit = match v {
                        FeatureValue::Category(x) => vocabulary.binary_search(x).ok(),
                        _ => None,
                    };
                    for k in 0..vocabulary.len() {
                        out.push(if hit == Some(k) { T::one() } else { T::zero() });
                    }
                    out.push(if v.is_missing() { T::one() } else { T::zero() });
                }
                (c, v) => {
                    return Err(Error::Schema(format!(
                        "feature `{}` cannot take value {v:?}",
                        c.name()
                    )))
                }
            }
        }
        Ok(())
    }
}
