//! Stagewise logistic gradient boosting.
//!
//! Each round fits a least-squares regression tree to the log-loss gradients
//! `p - y`, sets each leaf to the Newton step `-sum(g) / sum(h)` and shrinks it
//! by the learning rate. If a round would raise the training log-loss its
//! leaves are halved until it does not (a zero tree is the fallback), so the
//! training loss never increases.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::tree::{grow, BinnedMatrix, Criterion, GrowParams, Stats, Tree};
use crate::error::Result;
use crate::rng::{stream, Purpose};
use crate::scalar::{log_loss_from_logit, sigmoid, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            subsample: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GradientBoosting<T> {
    pub initial_score: T,
    pub trees: Vec<Tree<T>>,
}

impl<T: Scalar> GradientBoosting<T> {
    pub fn decision(&self, row: &[T]) -> T {
        self.trees
            .iter()
            .fold(self.initial_score, |acc, t| acc + t.predict(row))
    }

    pub fn predict_proba(&self, row: &[T]) -> T {
        sigmoid(self.decision(row))
    }
}

/// Mean training log-loss before any tree and after every round.
#[derive(Debug, Clone, Default)]
pub struct GbdtTrace {
    pub log_loss: Vec<f64>,
    pub backtracked_rounds: usize,
}

struct Gradient<'a, T> {
    grad: &'a [T],
    hess: &'a [T],
}

impl<T: Scalar> Criterion<T> for Gradient<'_, T> {
    fn row_stats(&self, row: usize) -> Stats<T> {
        [T::one(), self.grad[row], self.hess[row]]
    }

    fn gain(&self, parent: &Stats<T>, left: &Stats<T>, right: &Stats<T>) -> T {
        left[1] * left[1] / left[0] + right[1] * right[1] / right[0] - parent[1] * parent[1] / parent[0]
    }

    fn leaf_value(&self, s: &Stats<T>) -> T {
        let h = s[2].max(T::of(1e-12));
        -s[1] / h
    }

    fn is_pure(&self, _s: &Stats<T>) -> bool {
        false
    }
}

fn mean_log_loss<T: Scalar>(scores: &[T], y: &[bool]) -> T {
    let sum = scores
        .iter()
        .zip(y)
        .fold(T::zero(), |acc, (&f, &l)| acc + log_loss_from_logit(f, l));
    sum / T::of_usize(scores.len())
}

pub fn train_gbdt<T: Scalar>(
    x: &Matrix<T>,
    y: &[bool],
    params: &GbdtParams,
    seed: u64,
) -> Result<(GradientBoosting<T>, GbdtTrace)> {
    super::check_labels(y)?;
    let n = x.n_rows();
    let positives = y.iter().filter(|&&l| l).count();
    let prevalence = positives as f64 / n as f64;
    let initial_score = T::of((prevalence / (1.0 - prevalence)).ln());

    let binned = BinnedMatrix::new(x);
    let grow_params = GrowParams {
        max_depth: Some(params.max_depth),
        min_leaf: 1,
        features_per_split: x.n_cols(),
    };
    let lr = T::of(params.learning_rate);
    let n_sub = ((n as f64 * params.subsample).round() as usize).clamp(1, n);

    let mut scores = vec![initial_score; n];
    let mut loss = mean_log_loss(&scores, y);
    let mut trace = GbdtTrace {
        log_loss: vec![loss.as_f64()],
        backtracked_rounds: 0,
    };
    let mut grad = vec![T::zero(); n];
    let mut hess = vec![T::zero(); n];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut candidate = vec![T::zero(); n];
    let mut tree_out = vec![T::zero(); n];

    for round in 0..params.rounds {
        for i in 0..n {
            let p = sigmoid(scores[i]);
            grad[i] = p - if y[i] { T::one() } else { T::zero() };
            hess[i] = p * (T::one() - p);
        }
        let rows: Vec<u32> = if n_sub < n {
            let mut rng = stream(seed, Purpose::RowSubsample, round as u64);
            let mut idx: Vec<u32> = sample(&mut rng, n, n_sub).into_iter().map(|i| i as u32).collect();
            idx.sort_unstable();
            idx
        } else {
            (0..n as u32).collect()
        };
        let criterion = Gradient { grad: &grad, hess: &hess };
        // Depth-limited trees use every feature; the rng is not consumed.
        let mut rng = stream(seed, Purpose::SplitFeatures, round as u64);
        let mut tree = grow(&binned, &criterion, rows, &grow_params, &mut rng);
        tree.map_leaves(|v| v * lr);

        for (i, row) in x.rows().enumerate() {
            tree_out[i] = tree.predict(row);
        }
        let mut scale = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..n {
                candidate[i] = scores[i] + tree_out[i] * scale;
            }
            let new_loss = mean_log_loss(&candidate, y);
            if new_loss <= loss {
                loss = new_loss;
                accepted = true;
                break;
            }
            scale = scale * T::of(0.5);
        }
        if scale != T::one() {
            trace.backtracked_rounds += 1;
        }
        if accepted {
            std::mem::swap(&mut scores, &mut candidate);
            if scale != T::one() {
                tree.map_leaves(|v| v * scale);
            }
        } else {
            tree = Tree::leaf(T::zero());
        }
        trees.push(tree);
        trace.log_loss.push(loss.as_f64());
    }
    Ok((GradientBoosting { initial_score, trees }, trace))
}
