//! Independent reference implementations shared by the integration tests and
//! the acceptance runner. Nothing here calls the code it checks.
#![allow(dead_code)]

use std::collections::BTreeMap;

use pirisk::cohort::{self, BradenReading, ClinicalEvent, CohortStore, EventValue};
use pirisk::featurelab::{self, DayDataset, FeatureValue};
use pirisk::pipeline::logistic::{gradient, objective};
use pirisk::pipeline::{gbdt, GbdtParams, Matrix};
use pirisk::staymetrics::{self, StayScore};
use pirisk::synthgen::{self, GeneratorConfig, SyntheticCohort};
use pirisk::time::Timestamp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random stays: `(day scores, label)`. Scores come from a small grid so ties
/// across stays and days are frequent.
pub fn random_stays(rng: &mut ChaCha8Rng, max_stays: usize) -> Vec<(Vec<f64>, bool)> {
    let n = rng.random_range(2..=max_stays);
    let grid = rng.random_range(3..60u32);
    let mut stays: Vec<(Vec<f64>, bool)> = (0..n)
        .map(|_| {
            let days = rng.random_range(1..8);
            let scores = (0..days).map(|_| rng.random_range(0..grid) as f64 / grid as f64).collect();
            (scores, rng.random_bool(0.3))
        })
        .collect();
    stays[0].1 = true;
    stays[1].1 = false;
    stays
}

pub fn to_stay_scores(stays: &[(Vec<f64>, bool)]) -> Vec<StayScore<f64>> {
    stays
        .iter()
        .enumerate()
        .map(|(i, (d, l))| StayScore::new(format!("s{i}"), d.clone(), *l).unwrap())
        .collect()
}

/// Brute force: a stay is flagged when any of its days reaches `t`.
pub fn brute_counts(stays: &[(Vec<f64>, bool)], t: f64) -> [usize; 4] {
    let mut c = [0usize; 4];
    for (days, label) in stays {
        let flagged = days.iter().any(|&d| d >= t);
        let k = match (flagged, *label) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        c[k] += 1;
    }
    c
}

/// Brute-force sweep: `+inf`, then every distinct day score, descending.
pub fn brute_curve(stays: &[(Vec<f64>, bool)]) -> Vec<(f64, [usize; 4])> {
    let mut ts: Vec<f64> = stays.iter().flat_map(|(d, _)| d.iter().copied()).collect();
    ts.sort_by(|a, b| b.total_cmp(a));
    ts.dedup();
    let mut out = vec![(f64::INFINITY, brute_counts(stays, f64::INFINITY))];
    let mut prev = out[0].1;
    for t in ts {
        let c = brute_counts(stays, t);
        // Day scores below every stay's maximum leave the stay counts unchanged.
        if c != prev {
            out.push((t, c));
            prev = c;
        }
    }
    out
}

fn sens(c: &[usize; 4]) -> f64 {
    c[0] as f64 / (c[0] + c[2]) as f64
}

fn prec(c: &[usize; 4]) -> f64 {
    if c[0] + c[1] == 0 {
        1.0
    } else {
        c[0] as f64 / (c[0] + c[1]) as f64
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

/// Confusion counts, curve and precision-at-sensitivity against the brute force.
pub fn check_metric_set(stays: &[(Vec<f64>, bool)], targets: &[f64]) -> Check {
    let scores = to_stay_scores(stays);
    let brute = brute_curve(stays);
    let curve = staymetrics::pr_curve(&scores).map_err(|e| e.to_string())?;
    if curve.points.len() != brute.len() {
        return Err(format!("curve has {} points, brute force {}", curve.points.len(), brute.len()));
    }
    for (p, (t, c)) in curve.points.iter().zip(&brute) {
        let got = [p.counts.vp, p.counts.fp, p.counts.fn_, p.counts.vn];
        if p.threshold != *t || got != *c {
            return Err(format!("point at {t}: {got:?} vs {c:?}"));
        }
        if !close(p.sensitivity, sens(c)) || !close(p.precision, prec(c)) {
            return Err(format!("point at {t}: fractions differ"));
        }
        let direct = staymetrics::confusion(&scores, *t);
        if [direct.vp, direct.fp, direct.fn_, direct.vn] != *c {
            return Err(format!("confusion at {t} differs"));
        }
    }
    for &target in targets {
        let expect = brute.iter().find(|(_, c)| sens(c) >= target);
        let got = staymetrics::precision_at_sensitivity(&curve, target).ok();
        match (expect, got) {
            (Some((t, c)), Some(p)) if p.threshold == *t && close(p.precision, prec(c)) => {}
            (None, None) => {}
            (e, g) => return Err(format!("precision at sensitivity {target}: {e:?} vs {g:?}")),
        }
    }
    Ok(())
}

pub fn check_metric_oracle(sets: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    for i in 0..sets {
        let stays = random_stays(&mut r, 1000);
        let targets: Vec<f64> = (0..5).map(|_| r.random_range(0.0..=1.0)).chain([0.0, 0.5, 1.0]).collect();
        check_metric_set(&stays, &targets).map_err(|e| format!("set {i}: {e}"))?;
    }
    Ok(())
}

/// Thresholded max equals OR of thresholded days at every distinct score.
pub fn check_or_equivalence(stays: &[(Vec<f64>, bool)]) -> Check {
    let mut ts: Vec<f64> = stays.iter().flat_map(|(d, _)| d.iter().copied()).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts.push(f64::INFINITY);
    for (i, (days, _)) in stays.iter().enumerate() {
        let agg = staymetrics::aggregate(days).map_err(|e| e.to_string())?;
        for &t in &ts {
            if (agg >= t) != days.iter().any(|&d| d >= t) {
                return Err(format!("stay {i} disagrees at threshold {t}"));
            }
        }
    }
    Ok(())
}

pub fn random_problem(r: &mut ChaCha8Rng, n: usize, d: usize) -> (Matrix<f64>, Vec<bool>) {
    let w: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let row: Vec<f64> = (0..d).map(|_| r.random_range(-1.5..1.5)).collect();
        let z: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + r.random_range(-1.0..1.0);
        y.push(if i < 2 { i == 0 } else { z > 0.0 });
        data.extend(row);
    }
    (Matrix::from_vec(n, d, data), y)
}

/// Central differences with step 1e-5 against the analytic gradient.
pub fn check_lr_gradient(points: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    for k in 0..points {
        let (x, y) = random_problem(&mut r, 60, 6);
        let lambda = 10f64.powf(r.random_range(-4.0..0.0));
        let theta: Vec<f64> = (0..7).map(|_| r.random_range(-1.0..1.0)).collect();
        let g = gradient(&x, &y, &theta, lambda);
        let h = 1e-5;
        let fd: Vec<f64> = (0..theta.len())
            .map(|j| {
                let (mut a, mut b) = (theta.clone(), theta.clone());
                a[j] += h;
                b[j] -= h;
                (objective(&x, &y, &a, lambda) - objective(&x, &y, &b, lambda)) / (2.0 * h)
            })
            .collect();
        let diff = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(fd.iter().map(|a| a * a).sum::<f64>().sqrt());
        let rel = diff / scale.max(1e-12);
        if rel > 1e-5 {
            return Err(format!("point {k}: relative error {rel:.3e}"));
        }
    }
    Ok(())
}

/// Loss never rises across rounds; depth 0 predicts the prevalence.
pub fn check_gbdt(datasets: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    for k in 0..datasets {
        let (x, y) = random_problem(&mut r, 300, 5);
        let params = GbdtParams {
            rounds: 40,
            max_depth: r.random_range(1..5),
            learning_rate: r.random_range(0.05..1.0),
            subsample: if k % 2 == 0 { 1.0 } else { 0.6 },
        };
        let (_, trace) = gbdt::train_gbdt(&x, &y, &params, k as u64).map_err(|e| e.to_string())?;
        if trace.log_loss.len() != params.rounds + 1 {
            return Err(format!("dataset {k}: trace has {} entries", trace.log_loss.len()));
        }
        if let Some(w) = trace.log_loss.windows(2).position(|w| w[1] > w[0]) {
            return Err(format!("dataset {k}: loss rose at round {}", w + 1));
        }
        let stump = GbdtParams { max_depth: 0, subsample: 1.0, ..params };
        let (m, _) = gbdt::train_gbdt(&x, &y, &stump, k as u64).map_err(|e| e.to_string())?;
        let prevalence = y.iter().filter(|&&l| l).count() as f64 / y.len() as f64;
        for i in 0..x.n_rows() {
            let p = m.predict_proba(x.row(i));
            if (p - prevalence).abs() > 1e-9 {
                return Err(format!("dataset {k}: depth-0 predicts {p}, prevalence {prevalence}"));
            }
        }
    }
    Ok(())
}

pub fn small_config(n_patients: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n_patients,
        seed,
        ..GeneratorConfig::default()
    }
}

pub fn filtered(cfg: &GeneratorConfig) -> (SyntheticCohort, CohortStore) {
    let g = synthgen::generate_cohort(cfg).unwrap();
    let (store, _) = cohort::apply_filters(&g.store);
    (g, store)
}

/// Adds, every 3 hours after each stay's first stage-2 injury, an extreme event
/// on every channel seen in the cohort plus a Braden reading of 6.
pub fn poison(store: &CohortStore) -> (CohortStore, usize) {
    let mut channels: BTreeMap<String, EventValue> = BTreeMap::new();
    for e in store.stays.values().flat_map(|s| &s.events) {
        let v = match &e.value {
            EventValue::Numeric(_) => EventValue::Numeric(1e6),
            EventValue::Category(_) => EventValue::Category("POISON".into()),
            EventValue::Flag => EventValue::Flag,
        };
        channels.entry(e.channel.clone()).or_insert(v);
    }
    let mut out = store.clone();
    let mut added = 0;
    for stay in out.stays.values_mut() {
        let Some(t0) = stay.first_stage2_time() else { continue };
        let end = stay.record.discharge_time;
        let mut t = Timestamp(t0.0 + 1);
        while t <= end {
            for (ch, v) in &channels {
                stay.events.push(ClinicalEvent {
                    timestamp: t,
                    channel: ch.clone(),
                    value: v.clone(),
                });
                added += 1;
            }
            stay.braden.push(BradenReading::new(t, 6, None).unwrap());
            added += 1;
            t = Timestamp(t.0 + 3 * 3600);
        }
        stay.events.sort_by_key(|e| e.timestamp);
        stay.braden.sort_by_key(|e| e.timestamp);
    }
    (out, added)
}

pub fn check_poison(store: &CohortStore) -> Check {
    let specs = featurelab::default_specs();
    let clean = featurelab::build_dataset(store, &specs).map_err(|e| e.to_string())?;
    let (poisoned, added) = poison(store);
    if added == 0 {
        return Err("no stay with an injury to poison".into());
    }
    let dirty = featurelab::build_dataset(&poisoned, &specs).map_err(|e| e.to_string())?;
    if clean.rows.len() != dirty.rows.len() {
        return Err("row count changed".into());
    }
    for (a, b) in clean.rows.iter().zip(&dirty.rows) {
        if a != b {
            return Err(format!("row {} day {} changed", a.stay_id, a.day_index));
        }
    }
    Ok(())
}

/// Column checks on a fitted preprocessor over `rows` of `ds`.
pub fn check_preprocessor(ds: &DayDataset) -> Check {
    use pirisk::pipeline::{ColumnParams, FittedPreprocessor};
    let rows: Vec<&[FeatureValue]> = ds.rows.iter().map(|r| r.features.as_slice()).collect();
    let (prep, _) = FittedPreprocessor::fit(&ds.schema, rows.iter().copied()).map_err(|e| e.to_string())?;
    let width = prep.output_width();
    if ds.schema.len() != 40 || width != 80 {
        return Err(format!("{} specs encode to {width} columns", ds.schema.len()));
    }
    let x: Vec<Vec<f64>> = rows.iter().map(|r| prep.transform(r).unwrap()).collect();
    let mut col = 0;
    for (j, c) in prep.columns.iter().enumerate() {
        if let &ColumnParams::Numeric { q1, q3, .. } = c {
            let mut observed: Vec<f64> = ds
                .rows
                .iter()
                .zip(&x)
                .filter(|(r, _)| matches!(r.features[j], FeatureValue::Numeric(_)))
                .map(|(_, t)| t[col])
                .collect();
            observed.sort_by(f64::total_cmp);
            let m = median(&observed);
            if m.abs() > 1e-12 {
                return Err(format!("column {} has transformed median {m}", c.name()));
            }
            let imputed = ds.rows.iter().zip(&x).filter(|(r, _)| r.features[j].is_missing());
            for (_, t) in imputed {
                if t[col] != 0.0 {
                    return Err(format!("column {}: missing value encodes to {}", c.name(), t[col]));
                }
            }
            if q3 == q1 {
                let raw = ds.rows.iter().zip(&x).filter_map(|(r, t)| match r.features[j] {
                    FeatureValue::Numeric(v) => Some((v, t[col])),
                    _ => None,
                });
                let m = median(&{
                    let mut v: Vec<f64> = raw.clone().map(|p| p.0).collect();
                    v.sort_by(f64::total_cmp);
                    v
                });
                if let Some((v, t)) = raw.into_iter().find(|&(v, t)| t != v - m) {
                    return Err(format!("column {}: zero IQR maps {v} to {t}", c.name()));
                }
            }
        }
        col += match c {
            ColumnParams::Category { vocabulary, .. } => vocabulary.len() + 1,
            _ => 1,
        };
    }
    Ok(())
}

pub fn median(v: &[f64]) -> f64 {
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
