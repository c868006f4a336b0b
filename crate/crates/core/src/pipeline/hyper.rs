//! Hyperparameters and their random-search spaces.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::forest::{ForestParams, MaxFeatures};
use super::gbdt::GbdtParams;
use super::logistic::LogisticParams;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "lr")]
    Logistic,
    #[serde(rename = "rf")]
    Forest,
    #[serde(rename = "gbdt")]
    Gbdt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Logistic, ModelKind::Forest, ModelKind::Gbdt];

    pub fn code(self) -> &'static str {
        match self {
            ModelKind::Logistic => "lr",
            ModelKind::Forest => "rf",
            ModelKind::Gbdt => "gbdt",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "Logistic Regression",
            ModelKind::Forest => "Random Forest",
            ModelKind::Gbdt => "Gradient Boosting",
        }
    }

    /// Draws one candidate from this kind's search space.
    pub fn sample<R: Rng>(self, rng: &mut R) -> Hyperparameters {
        match self {
            ModelKind::Logistic => {
                let lambda = log_uniform(rng, 1e-4, 10.0);
                Hyperparameters::Logistic(LogisticParams {
                    lambda,
                    ..LogisticParams::default()
                })
            }
            ModelKind::Forest => Hyperparameters::Forest(ForestParams {
                n_trees: pick(rng, &[100, 200, 400]),
                max_depth: pick(rng, &[Some(4), Some(8), Some(16), None]),
                min_leaf: pick(rng, &[1, 5, 20]),
                max_features: pick(rng, &[MaxFeatures::Sqrt, MaxFeatures::Half, MaxFeatures::All]),
                bootstrap: true,
            }),
            ModelKind::Gbdt => Hyperparameters::Gbdt(GbdtParams {
                rounds: rng.random_range(50..=500),
                max_depth: rng.random_range(2..=6),
                learning_rate: log_uniform(rng, 0.01, 0.3),
                subsample: pick(rng, &[0.5, 0.8, 1.0]),
            }),
        }
    }
}

fn pick<T: Copy, R: Rng>(rng: &mut R, options: &[T]) -> T {
    options[rng.random_range(0..options.len())]
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lr" | "logistic" => Ok(ModelKind::Logistic),
            "rf" | "forest" => Ok(ModelKind::Forest),
            "gbdt" | "gb" => Ok(ModelKind::Gbdt),
            other => Err(Error::Config(format!("unknown model kind `{other}` (expected lr, rf or gbdt)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyperparameters {
    Logistic(LogisticParams),
    Forest(ForestParams),
    Gbdt(GbdtParams),
}

impl Hyperparameters {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyperparameters::Logistic(_) => ModelKind::Logistic,
            Hyperparameters::Forest(_) => ModelKind::Forest,
            Hyperparameters::Gbdt(_) => ModelKind::Gbdt,
        }
    }

    /// True when every value lies inside the declared search space.
    pub fn in_space(&self) -> bool {
        match self {
            Hyperparameters::Logistic(p) => (1e-4..=10.0).contains(&p.lambda),
            Hyperparameters::Forest(p) => {
                [100, 200, 400].contains(&p.n_trees)
                    && [Some(4), Some(8), Some(16), None].contains(&p.max_depth)
                    && [1, 5, 20].contains(&p.min_leaf)
            }
            Hyperparameters::Gbdt(p) => {
                (50..=500).contains(&p.rounds)
                    && (2..=6).contains(&p.max_depth)
                    && (0.01..=0.3).contains(&p.learning_rate)
                    && [0.5, 0.8, 1.0].contains(&p.subsample)
            }
        }
    }
}

impl fmt::Display for Hyperparameters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hyperparameters::Logistic(p) => write!(f, "lambda={:.3e}", p.lambda),
            Hyperparameters::Forest(p) => write!(
                f,
                "trees={} max_depth={} min_leaf={} max_features={:?}",
                p.n_trees,
                p.max_depth.map_or("none".to_string(), |d| d.to_string()),
                p.min_leaf,
                p.max_features
            ),
            Hyperparameters::Gbdt(p) => write!(
                f,
                "rounds={} depth={} lr={:.4} subsample={}",
                p.rounds, p.max_depth, p.learning_rate, p.subsample
            ),
        }
    }
}
