//! Stratified train/test split and cross-validation folds over split units.
//!
//! A unit is a stay by default, or all stays of one patient when grouping by
//! patient. A unit is positive when any of its stays is.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub id: String,
    pub stays: Vec<String>,
    pub label: bool,
}

/// One unit per stay.
pub fn stay_units(labels: &BTreeMap<String, bool>) -> Vec<Unit> {
    labels
        .iter()
        .map(|(id, &label)| Unit {
            id: id.clone(),
            stays: vec![id.clone()],
            label,
        })
        .collect()
}

/// One unit per patient; `patient_of` maps stay id to patient id.
pub fn patient_units(labels: &BTreeMap<String, bool>, patient_of: &BTreeMap<String, String>) -> Result<Vec<Unit>> {
    let mut groups: BTreeMap<&str, Unit> = BTreeMap::new();
    for (stay, &label) in labels {
        let p = patient_of
            .get(stay)
            .ok_or_else(|| Error::Schema(format!("stay `{stay}` has no patient")))?;
        let u = groups.entry(p).or_insert_with(|| Unit {
            id: p.clone(),
            stays: Vec::new(),
            label: false,
        });
        u.stays.push(stay.clone());
        u.label |= label;
    }
    Ok(groups.into_values().collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<Unit>,
    pub test: Vec<Unit>,
}

impl Split {
    pub fn train_stays(&self) -> Vec<String> {
        sorted_stays(&self.train)
    }

    pub fn test_stays(&self) -> Vec<String> {
        sorted_stays(&self.test)
    }
}

fn sorted_stays(units: &[Unit]) -> Vec<String> {
    let mut v: Vec<String> = units.iter().flat_map(|u| u.stays.iter().cloned()).collect();
    v.sort();
    v
}

fn partition(units: &[Unit]) -> (Vec<&Unit>, Vec<&Unit>) {
    let mut sorted: Vec<&Unit> = units.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    sorted.into_iter().partition(|u| u.label)
}

/// Splits units so the training side holds `floor(n * ratio + 0.5)` units,
/// of which `floor(n_pos * ratio + 0.5)` are positive, with at least one
/// positive and one negative unit on each side.
pub fn split_stays(units: &[Unit], ratio: f64, seed: u64) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let (mut pos, mut neg) = partition(units);
    if pos.len() < 2 || neg.len() < 2 {
        return Err(Error::Stratification(format!(
            "need at least two positive and two negative units to split, have {} and {}",
            pos.len(),
            neg.len()
        )));
    }
    let round = |x: f64| (x + 0.5).floor() as usize;
    let n = pos.len() + neg.len();
    let pos_train = round(pos.len() as f64 * ratio).clamp(1, pos.len() - 1);
    let neg_train = round(n as f64 * ratio)
        .saturating_sub(pos_train)
        .clamp(1, neg.len() - 1);

    pos.shuffle(&mut stream(seed, Purpose::Split, 0));
    neg.shuffle(&mut stream(seed, Purpose::Split, 1));
    let mut train: Vec<Unit> = pos[..pos_train].iter().chain(&neg[..neg_train]).map(|u| (*u).clone()).collect();
    let mut test: Vec<Unit> = pos[pos_train..].iter().chain(&neg[neg_train..]).map(|u| (*u).clone()).collect();
    train.sort_by(|a, b| a.id.cmp(&b.id));
    test.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Split { train, test })
}

/// Deals shuffled positives, then shuffled negatives, round-robin into `k`
/// folds. Each fold is returned sorted by unit id.
pub fn cv_folds(units: &[Unit], k: usize, seed: u64) -> Result<Vec<Vec<Unit>>> {
    let (mut pos, mut neg) = partition(units);
    if k < 2 || k > pos.len() || k > neg.len() {
        return Err(Error::Stratification(format!(
            "{k} folds need k >= 2 and at least k positive and k negative units (have {} and {})",
            pos.len(),
            neg.len()
        )));
    }
    pos.shuffle(&mut stream(seed, Purpose::Folds, 0));
    neg.shuffle(&mut stream(seed, Purpose::Folds, 1));
    let mut folds: Vec<Vec<Unit>> = vec![Vec::new(); k];
    for (i, u) in pos.iter().chain(&neg).enumerate() {
        folds[i % k].push((*u).clone());
    }
    for f in &mut folds {
        f.sort_by(|a, b| a.id.cmp(&b.id));
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn units(pos: usize, neg: usize) -> Vec<Unit> {
        let labels: BTreeMap<String, bool> = (0..pos + neg).map(|i| (format!("s{i:03}"), i < pos)).collect();
        stay_units(&labels)
    }

    fn count(us: &[Unit]) -> (usize, usize) {
        (us.len(), us.iter().filter(|u| u.label).count())
    }

    #[test]
    fn ten_stays_two_positive() {
        let s = split_stays(&units(2, 8), 0.8, 1).unwrap();
        assert_eq!(count(&s.train), (8, 1));
        assert_eq!(count(&s.test), (2, 1));
    }

    #[test]
    fn half_split_of_four() {
        let s = split_stays(&units(2, 2), 0.5, 3).unwrap();
        assert_eq!(count(&s.train), (2, 1));
        assert_eq!(count(&s.test), (2, 1));
    }

    #[test]
    fn exact_proportions_on_larger_sets() {
        let s = split_stays(&units(50, 950), 0.8, 9).unwrap();
        assert_eq!(count(&s.train), (800, 40));
        assert_eq!(count(&s.test), (200, 10));
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let u = units(30, 300);
        let a = split_stays(&u, 0.8, 5).unwrap();
        assert_eq!(a, split_stays(&u, 0.8, 5).unwrap());
        assert_ne!(a, split_stays(&u, 0.8, 6).unwrap());
        let train = a.train_stays();
        assert!(a.test_stays().iter().all(|s| train.binary_search(s).is_err()));
        assert_eq!(train.len() + a.test_stays().len(), 330);
    }

    #[test]
    fn too_few_units_to_stratify() {
        assert!(matches!(split_stays(&units(1, 10), 0.8, 0), Err(Error::Stratification(_))));
        assert!(matches!(split_stays(&units(5, 1), 0.8, 0), Err(Error::Stratification(_))));
        assert!(matches!(split_stays(&units(5, 5), 1.0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn folds_cover_and_stratify() {
        let u = units(23, 177);
        let folds = cv_folds(&u, 5, 4).unwrap();
        let mut all: Vec<&str> = folds.iter().flatten().map(|u| u.id.as_str()).collect();
        all.sort_unstable();
        let before = all.len();
        all.dedup();
        assert_eq!((before, all.len()), (200, 200));
        for f in &folds {
            let p = f.iter().filter(|u| u.label).count();
            assert!((4..=5).contains(&p));
            assert_eq!(f.len(), 40);
        }
        assert_eq!(folds, cv_folds(&u, 5, 4).unwrap());
        assert!(cv_folds(&units(4, 100), 5, 0).is_err());
        assert!(cv_folds(&u, 1, 0).is_err());
    }

    #[test]
    fn patient_units_merge_stays() {
        let labels: BTreeMap<String, bool> =
            [("a1", false), ("a2", true), ("b1", false)].map(|(k, v)| (k.to_string(), v)).into();
        let patients: BTreeMap<String, String> =
            [("a1", "A"), ("a2", "A"), ("b1", "B")].map(|(k, v)| (k.to_string(), v.to_string())).into();
        let u = patient_units(&labels, &patients).unwrap();
        assert_eq!(u.len(), 2);
        assert!(u[0].label && !u[1].label);
        assert_eq!(u[0].stays, ["a1", "a2"]);
    }
}
