//! Cross-validated random hyperparameter search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurelab::DayDataset;
use crate::pipeline::{FittedPipeline, Hyperparameters, ModelKind};
use crate::rng::{derive_seed, stream, Purpose};
use crate::staymetrics::{collect_stay_scores, pr_curve, precision_at_sensitivity};

fn kind_index(kind: ModelKind) -> u64 {
    ModelKind::ALL.iter().position(|&k| k == kind).expect("listed kind") as u64
}

/// Candidate `index` of `kind`'s search, drawn from its own stream.
pub fn sample_candidate(kind: ModelKind, index: usize, seed: u64) -> Hyperparameters {
    kind.sample(&mut stream(seed, Purpose::Search, (kind_index(kind) << 32) | index as u64))
}

/// Seed handed to the model fitted for `(kind, candidate, fold)`. The final
/// refit on the whole training side uses `fold = folds`.
pub fn model_seed(seed: u64, kind: ModelKind, candidate: usize, fold: usize) -> u64 {
    derive_seed(
        seed,
        Purpose::Model,
        (kind_index(kind) << 48) | ((candidate as u64) << 16) | fold as u64,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub index: usize,
    pub hyperparameters: Hyperparameters,
    /// Validation precision at the target sensitivity, one per fold.
    pub fold_scores: Vec<f64>,
    pub mean: Option<f64>,
    pub error: Option<String>,
    /// Out-of-fold day scores as `(row, score)`, sorted by row.
    #[serde(skip)]
    pub out_of_fold: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub kind: ModelKind,
    pub results: Vec<CvResult>,
    pub best: usize,
}

impl SearchResult {
    pub fn best(&self) -> &CvResult {
        &self.results[self.best]
    }
}

/// Draws `n` candidates and scores each by mean validation precision at
/// `target` sensitivity over `folds` (row indices of `ds` per fold).
pub fn random_search(
    ds: &DayDataset,
    folds: &[Vec<usize>],
    kind: ModelKind,
    n: usize,
    seed: u64,
    target: f64,
) -> Result<SearchResult> {
    if n == 0 {
        return Err(Error::Config("search needs at least one sample".into()));
    }
    let candidates: Vec<Hyperparameters> = (0..n).map(|i| sample_candidate(kind, i, seed)).collect();
    evaluate_candidates(ds, folds, kind, &candidates, seed, target)
}

/// Scores the given candidates; the highest mean wins, ties go to the lower
/// index. Fails only when every candidate fails.
pub fn evaluate_candidates(
    ds: &DayDataset,
    folds: &[Vec<usize>],
    kind: ModelKind,
    candidates: &[Hyperparameters],
    seed: u64,
    target: f64,
) -> Result<SearchResult> {
    let k = folds.len();
    let jobs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..k).map(move |f| (c, f)))
        .collect();
    let outputs: Vec<Result<Vec<(usize, f64)>>> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, rows)| rows.iter().copied())
                .collect();
            let pipeline = FittedPipeline::<f64>::fit(ds, &train, &candidates[c], model_seed(seed, kind, c, f))?;
            let scores = pipeline.predict_rows(ds, &folds[f])?;
            Ok(folds[f].iter().copied().zip(scores).collect())
        })
        .collect();

    let mut outputs = outputs.into_iter();
    let mut results = Vec::with_capacity(candidates.len());
    for (index, hp) in candidates.iter().enumerate() {
        let mut fold_scores = Vec::with_capacity(k);
        let mut out_of_fold = Vec::new();
        let mut error = None;
        for f in 0..k {
            let scored = outputs.next().expect("one output per job");
            if error.is_some() {
                continue;
            }
            match scored.and_then(|s| fold_precision(ds, &s, target).map(|p| (s, p))) {
                Ok((s, p)) => {
                    fold_scores.push(p);
                    out_of_fold.extend(s);
                }
                Err(e) => error = Some(format!("fold {f}: {e}")),
            }
        }
        out_of_fold.sort_by_key(|&(r, _)| r);
        let mean = error.is_none().then(|| fold_scores.iter().sum::<f64>() / k as f64);
        results.push(CvResult {
            index,
            hyperparameters: *hp,
            fold_scores,
            mean,
            error,
            out_of_fold,
        });
    }

    let mut best: Option<usize> = None;
    for r in &results {
        if let Some(m) = r.mean {
            if best.is_none_or(|b| m > results[b].mean.expect("best has a mean")) {
                best = Some(r.index);
            }
        }
    }
    let Some(best) = best else {
        let failures: Vec<String> = results
            .iter()
            .map(|r| format!("candidate {}: {}", r.index, r.error.as_deref().unwrap_or("?")))
            .collect();
        return Err(Error::Unachievable(format!(
            "every {kind} candidate failed: {}",
            failures.join("; ")
        )));
    };
    Ok(SearchResult { kind, results, best })
}

/// Stay-level precision at `target` sensitivity for scored rows of `ds`.
pub fn fold_precision(ds: &DayDataset, scored: &[(usize, f64)], target: f64) -> Result<f64> {
    let (stays, _) = collect_stay_scores(
        scored.iter().map(|&(r, s)| (ds.rows[r].stay_id.as_str(), s)),
        &ds.stay_labels,
    )?;
    Ok(precision_at_sensitivity(&pr_curve(&stays)?, target)?.precision)
}
