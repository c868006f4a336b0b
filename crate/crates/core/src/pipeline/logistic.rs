//! L2-regularised logistic regression fitted by full-batch gradient descent
//! with a backtracking (Armijo) line search.
//!
//! Objective: `mean_i logloss(x_i·w + b, y_i) + lambda/2 · |w|²`; the
//! intercept is not penalised.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::Result;
use crate::scalar::{log_loss_from_logit, sigmoid, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LogisticRegression<T> {
    pub weights: Vec<T>,
    pub intercept: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub lambda: f64,
    pub max_iter: usize,
    pub tolerance: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            max_iter: 2000,
            tolerance: 1e-6,
        }
    }
}

/// Objective values after every accepted step, starting with the initial point.
#[derive(Debug, Clone, Default)]
pub struct LogisticTrace {
    pub objective: Vec<f64>,
    pub converged: bool,
}

impl<T: Scalar> LogisticRegression<T> {
    pub fn zeros(n_features: usize) -> Self {
        Self {
            weights: vec![T::zero(); n_features],
            intercept: T::zero(),
        }
    }

    pub fn decision(&self, row: &[T]) -> T {
        self.intercept + dot(&self.weights, row)
    }

    pub fn predict_proba(&self, row: &[T]) -> T {
        sigmoid(self.decision(row))
    }

    /// Packs `[w..., b]`.
    fn theta(&self) -> Vec<T> {
        let mut t = self.weights.clone();
        t.push(self.intercept);
        t
    }

    fn from_theta(theta: &[T]) -> Self {
        let (w, b) = theta.split_at(theta.len() - 1);
        Self {
            weights: w.to_vec(),
            intercept: b[0],
        }
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `X w + b` for `theta = [w..., b]`.
fn margins<T: Scalar>(x: &Matrix<T>, theta: &[T]) -> Vec<T> {
    let d = x.n_cols();
    let (w, b) = (&theta[..d], theta[d]);
    x.rows().map(|row| b + dot(w, row)).collect()
}

fn objective_at<T: Scalar>(z: &[T], y: &[bool], theta: &[T], lambda: T) -> T {
    let w = &theta[..theta.len() - 1];
    let loss = z
        .iter()
        .zip(y)
        .fold(T::zero(), |acc, (&m, &label)| acc + log_loss_from_logit(m, label));
    loss / T::of_usize(z.len()) + lambda * dot(w, w) / T::of(2.0)
}

fn gradient_at<T: Scalar>(x: &Matrix<T>, z: &[T], y: &[bool], theta: &[T], lambda: T) -> Vec<T> {
    let d = x.n_cols();
    let mut g = vec![T::zero(); d + 1];
    for ((row, &m), &label) in x.rows().zip(z).zip(y) {
        let r = sigmoid(m) - if label { T::one() } else { T::zero() };
        for (gj, &xj) in g.iter_mut().zip(row) {
            *gj = *gj + r * xj;
        }
        g[d] = g[d] + r;
    }
    let n = T::of_usize(x.n_rows());
    for (j, gj) in g.iter_mut().enumerate() {
        *gj = *gj / n;
        if j < d {
            *gj = *gj + lambda * theta[j];
        }
    }
    g
}

/// Regularised mean log-loss at `theta = [w..., b]`.
pub fn objective<T: Scalar>(x: &Matrix<T>, y: &[bool], theta: &[T], lambda: T) -> T {
    objective_at(&margins(x, theta), y, theta, lambda)
}

/// Analytic gradient of [`objective`].
pub fn gradient<T: Scalar>(x: &Matrix<T>, y: &[bool], theta: &[T], lambda: T) -> Vec<T> {
    gradient_at(x, &margins(x, theta), y, theta, lambda)
}

/// Full-batch gradient descent. Each step starts from the Barzilai-Borwein
/// length and halves until the Armijo condition holds; margins are linear
/// along the step, so trial objectives cost O(n).
pub fn train_logistic<T: Scalar>(
    x: &Matrix<T>,
    y: &[bool],
    params: &LogisticParams,
) -> Result<(LogisticRegression<T>, LogisticTrace)> {
    super::check_labels(y)?;
    let lambda = T::of(params.lambda);
    let tol = T::of(params.tolerance);
    let armijo = T::of(1e-4);

    let mut theta = LogisticRegression::<T>::zeros(x.n_cols()).theta();
    let mut z = margins(x, &theta);
    let mut f = objective_at(&z, y, &theta, lambda);
    let mut g = gradient_at(x, &z, y, &theta, lambda);
    let mut trace = LogisticTrace {
        objective: vec![f.as_f64()],
        converged: false,
    };
    let mut step = T::one();
    let mut prev: Option<(Vec<T>, Vec<T>)> = None;
    let mut cand = vec![T::zero(); theta.len()];
    let mut cand_z = vec![T::zero(); z.len()];

    for _ in 0..params.max_iter {
        let gnorm_inf = g.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if gnorm_inf <= tol {
            trace.converged = true;
            break;
        }
        if let Some((theta_prev, g_prev)) = &prev {
            let s: Vec<T> = theta.iter().zip(theta_prev).map(|(a, b)| *a - *b).collect();
            let yv: Vec<T> = g.iter().zip(g_prev).map(|(a, b)| *a - *b).collect();
            let sy = dot(&s, &yv);
            if sy > T::zero() {
                step = (dot(&s, &s) / sy).max(T::of(1e-10)).min(T::of(1e10));
            }
        }
        let v = margins(x, &g);
        let g2 = dot(&g, &g);
        let mut accepted = None;
        while step > T::of(1e-20) {
            for ((c, t), gi) in cand.iter_mut().zip(&theta).zip(&g) {
                *c = *t - step * *gi;
            }
            for ((c, zi), vi) in cand_z.iter_mut().zip(&z).zip(&v) {
                *c = *zi - step * *vi;
            }
            let fc = objective_at(&cand_z, y, &cand, lambda);
            if fc <= f - armijo * step * g2 && fc < f {
                accepted = Some(fc);
                break;
            }
            step = step / T::of(2.0);
        }
        let Some(fc) = accepted else { break };
        std::mem::swap(&mut z, &mut cand_z);
        let g_new = gradient_at(x, &z, y, &cand, lambda);
        let theta_prev = std::mem::replace(&mut theta, cand.clone());
        prev = Some((theta_prev, std::mem::replace(&mut g, g_new)));
        f = fc;
        trace.objective.push(f.as_f64());
    }
    if !trace.converged {
        trace.converged = g.iter().all(|v| v.abs() <= tol);
    }
    Ok((LogisticRegression::from_theta(&theta), trace))
}
