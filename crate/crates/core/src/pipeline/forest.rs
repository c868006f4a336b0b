//! Random forest of Gini CART trees on bootstrap samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::tree::{grow, BinnedMatrix, Criterion, GrowParams, Stats, Tree};
use crate::error::Result;
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    Half,
    All,
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().round() as usize,
            MaxFeatures::Half => (n_features as f64 * 0.5).round() as usize,
            MaxFeatures::All => n_features,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RandomForest<T> {
    pub trees: Vec<Tree<T>>,
}

impl<T: Scalar> RandomForest<T> {
    /// Mean of the trees' leaf class frequencies. Leaf values are summed in
    /// sorted order, so the result does not depend on tree order.
    pub fn predict_proba(&self, row: &[T]) -> T {
        let mut leaves: Vec<T> = self.trees.iter().map(|t| t.predict(row)).collect();
        leaves.sort_by(|a, b| a.partial_cmp(b).expect("leaf values are finite"));
        let sum = leaves.into_iter().fold(T::zero(), |a, b| a + b);
        sum / T::of_usize(self.trees.len())
    }
}

/// Gini impurity `2p(1-p)` of weighted counts `[n, n_pos, _]`.
pub fn gini<T: Scalar>(s: &Stats<T>) -> T {
    if s[0] <= T::zero() {
        return T::zero();
    }
    let p = s[1] / s[0];
    T::of(2.0) * p * (T::one() - p)
}

/// Impurity decrease `G(parent) - nL/n G(left) - nR/n G(right)`.
pub fn gini_gain<T: Scalar>(parent: &Stats<T>, left: &Stats<T>, right: &Stats<T>) -> T {
    gini(parent) - left[0] / parent[0] * gini(left) - right[0] / parent[0] * gini(right)
}

struct Gini<'a, T> {
    weights: &'a [T],
    y: &'a [bool],
}

impl<T: Scalar> Criterion<T> for Gini<'_, T> {
    fn row_stats(&self, row: usize) -> Stats<T> {
        let w = self.weights[row];
        [w, if self.y[row] { w } else { T::zero() }, T::zero()]
    }

    fn gain(&self, parent: &Stats<T>, left: &Stats<T>, right: &Stats<T>) -> T {
        gini_gain(parent, left, right)
    }

    fn leaf_value(&self, s: &Stats<T>) -> T {
        s[1] / s[0]
    }

    fn is_pure(&self, s: &Stats<T>) -> bool {
        s[1] <= T::zero() || s[1] >= s[0]
    }
}

pub fn train_forest<T: Scalar>(
    x: &Matrix<T>,
    y: &[bool],
    params: &ForestParams,
    seed: u64,
) -> Result<RandomForest<T>> {
    super::check_labels(y)?;
    let binned = BinnedMatrix::new(x);
    let n = x.n_rows();
    let grow_params = GrowParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        features_per_split: params.max_features.resolve(x.n_cols()),
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut weights = vec![T::zero(); n];
            if params.bootstrap {
                use rand::Rng;
                let mut rng = stream(seed, Purpose::Bootstrap, t as u64);
                for _ in 0..n {
                    let i = rng.random_range(0..n);
                    weights[i] = weights[i] + T::one();
                }
            } else {
                weights.iter_mut().for_each(|w| *w = T::one());
            }
            let rows: Vec<u32> = (0..n as u32).filter(|&i| weights[i as usize] > T::zero()).collect();
            let criterion = Gini { weights: &weights, y };
            let mut rng = stream(seed, Purpose::SplitFeatures, t as u64);
            grow(&binned, &criterion, rows, &grow_params, &mut rng)
        })
        .collect();
    Ok(RandomForest { trees })
}
