//! Preprocessor + model, fitted together and serialised as one artifact.

pub mod forest;
pub mod gbdt;
pub mod hyper;
pub mod logistic;
pub mod matrix;
pub mod preprocess;
pub mod tree;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::featurelab::{DayDataset, FeatureSpec, FeatureValue};
use crate::scalar::Scalar;

pub use forest::{ForestParams, MaxFeatures, RandomForest};
pub use gbdt::{GbdtParams, GradientBoosting};
pub use hyper::{Hyperparameters, ModelKind};
pub use logistic::{LogisticParams, LogisticRegression};
pub use matrix::Matrix;
pub use preprocess::{ColumnParams, FittedPreprocessor};

pub const ARTIFACT_FORMAT: &str = "pirisk-pipeline";
pub const ARTIFACT_VERSION: u32 = 1;

pub(crate) fn check_labels(y: &[bool]) -> Result<()> {
    let pos = y.iter().filter(|&&l| l).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateLabels(format!(
            "{pos} positive of {} training rows; both classes are required",
            y.len()
        )));
    }
    Ok(())
}

/// Hex SHA-256 over feature names and output kinds, in order.
pub fn schema_hash(schema: &[FeatureSpec]) -> String {
    let mut h = Sha256::new();
    for s in schema {
        h.update(s.name.as_bytes());
        h.update([0u8]);
        h.update(format!("{:?}", s.output_kind).as_bytes());
        h.update([0xffu8]);
    }
    hex::encode(&h.finalize()[..16])
}

/// Hex SHA-256 over sorted stay ids; records which stays trained a model.
pub fn stay_set_digest<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.sort_unstable();
    ids.dedup();
    let mut h = Sha256::new();
    for id in ids {
        h.update(id.as_bytes());
        h.update([0u8]);
    }
    hex::encode(&h.finalize()[..16])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum Model<T> {
    Logistic(LogisticRegression<T>),
    Forest(RandomForest<T>),
    Gbdt(GradientBoosting<T>),
}

impl<T: Scalar> Model<T> {
    pub fn predict_proba(&self, row: &[T]) -> T {
        match self {
            Model::Logistic(m) => m.predict_proba(row),
            Model::Forest(m) => m.predict_proba(row),
            Model::Gbdt(m) => m.predict_proba(row),
        }
    }
}

/// Trains the model selected by `hp` on an already-transformed matrix.
pub fn train_model<T: Scalar>(x: &Matrix<T>, y: &[bool], hp: &Hyperparameters, seed: u64) -> Result<Model<T>> {
    Ok(match hp {
        Hyperparameters::Logistic(p) => Model::Logistic(logistic::train_logistic(x, y, p)?.0),
        Hyperparameters::Forest(p) => Model::Forest(forest::train_forest(x, y, p, seed)?),
        Hyperparameters::Gbdt(p) => Model::Gbdt(gbdt::train_gbdt(x, y, p, seed)?.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub hyperparameters: Hyperparameters,
    pub schema_hash: String,
    pub training_rows: usize,
    pub training_stays: usize,
    pub training_stays_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FittedPipeline<T> {
    pub schema: Vec<FeatureSpec>,
    pub preprocessor: FittedPreprocessor,
    pub model: Model<T>,
    pub metadata: TrainingMetadata,
}

impl<T: Scalar> FittedPipeline<T> {
    /// Fits the preprocessor and model on `rows` of `ds` only.
    pub fn fit(ds: &DayDataset, rows: &[usize], hp: &Hyperparameters, seed: u64) -> Result<Self> {
        let (preprocessor, _warnings) =
            FittedPreprocessor::fit(&ds.schema, rows.iter().map(|&i| ds.rows[i].features.as_slice()))?;
        let x = transform_rows(&preprocessor, rows.iter().map(|&i| ds.rows[i].features.as_slice()))?;
        let y: Vec<bool> = rows.iter().map(|&i| ds.rows[i].label).collect();
        let model = train_model(&x, &y, hp, seed)?;
        let schema_hash = preprocessor.schema_hash.clone();
        Ok(Self {
            schema: ds.schema.clone(),
            preprocessor,
            model,
            metadata: TrainingMetadata {
                seed,
                hyperparameters: *hp,
                schema_hash,
                training_rows: rows.len(),
                training_stays: stay_count(ds, rows),
                training_stays_digest: stay_set_digest(rows.iter().map(|&i| ds.rows[i].stay_id.as_str())),
            },
        })
    }

    pub fn predict_proba(&self, row: &[FeatureValue]) -> Result<T> {
        let x: Vec<T> = self.preprocessor.transform(row)?;
        Ok(self.model.predict_proba(&x))
    }

    /// Scores `rows` of `ds`; the dataset schema must match the pipeline's.
    pub fn predict_rows(&self, ds: &DayDataset, rows: &[usize]) -> Result<Vec<T>> {
        let hash = schema_hash(&ds.schema);
        if hash != self.metadata.schema_hash {
            return Err(Error::Artifact(format!(
                "schema hash mismatch: pipeline {} vs dataset {hash}",
                self.metadata.schema_hash
            )));
        }
        rows.par_iter()
            .map(|&i| self.predict_proba(&ds.rows[i].features))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let artifact = Artifact {
            format: ARTIFACT_FORMAT.into(),
            format_version: ARTIFACT_VERSION,
            scalar: scalar_name::<T>().into(),
            schema_hash: self.metadata.schema_hash.clone(),
            pipeline: self.clone(),
        };
        serde_json::to_string_pretty(&artifact).map_err(|e| Error::Artifact(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header: ArtifactHeader =
            serde_json::from_str(text).map_err(|e| Error::Artifact(format!("unreadable artifact: {e}")))?;
        if header.format != ARTIFACT_FORMAT {
            return Err(Error::Artifact(format!("not a pipeline artifact (format `{}`)", header.format)));
        }
        if header.format_version != ARTIFACT_VERSION {
            return Err(Error::Artifact(format!(
                "artifact version {} is not supported (expected {ARTIFACT_VERSION})",
                header.format_version
            )));
        }
        if header.scalar != scalar_name::<T>() {
            return Err(Error::Artifact(format!(
                "artifact holds {} parameters, requested {}",
                header.scalar,
                scalar_name::<T>()
            )));
        }
        let artifact: Artifact<T> =
            serde_json::from_str(text).map_err(|e| Error::Artifact(format!("corrupt artifact: {e}")))?;
        let p = artifact.pipeline;
        let expected = schema_hash(&p.schema);
        if artifact.schema_hash != expected
            || p.preprocessor.schema_hash != expected
            || p.metadata.schema_hash != expected
        {
            return Err(Error::Artifact("schema hash mismatch inside artifact".into()));
        }
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }
}

fn stay_count(ds: &DayDataset, rows: &[usize]) -> usize {
    let mut ids: Vec<&str> = rows.iter().map(|&i| ds.rows[i].stay_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.len()
}

pub fn transform_rows<'a, T: Scalar>(
    prep: &FittedPreprocessor,
    rows: impl Iterator<Item = &'a [FeatureValue]>,
) -> Result<Matrix<T>> {
    let width = prep.output_width();
    let mut data = Vec::new();
    let mut n = 0;
    for r in rows {
        prep.transform_into(r, &mut data)?;
        n += 1;
    }
    Ok(Matrix::from_vec(n, width, data))
}

fn scalar_name<T: Scalar>() -> &'static str {
    if std::mem::size_of::<T>() == 4 {
        "f32"
    } else {
        "f64"
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct Artifact<T> {
    format: String,
    format_version: u32,
    scalar: String,
    schema_hash: String,
    pipeline: FittedPipeline<T>,
}

#[derive(Deserialize)]
struct ArtifactHeader {
    format: String,
    format_version: u32,
    scalar: String,
}
