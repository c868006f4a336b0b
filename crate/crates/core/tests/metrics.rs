mod common;

use common::*;
use pirisk::harness::{care_improvement, cost_reduction};
use pirisk::staymetrics::{self, StayScore};
use proptest::prelude::*;

#[test]
fn curves_match_brute_force_sweep() {
    check_metric_oracle(200, 7).unwrap();
}

#[test]
fn thresholded_max_is_or_of_days() {
    let mut r = rng(11);
    let mut stays = Vec::new();
    while stays.len() < 1000 {
        stays.extend(random_stays(&mut r, 200));
    }
    stays.truncate(1000);
    check_or_equivalence(&stays).unwrap();
}

#[test]
fn published_derived_figures() {
    assert!((cost_reduction(0.1281, 0.2099) - 0.3897).abs() <= 1e-4);
    assert!((care_improvement(0.8182, 0.50) - 0.6364).abs() <= 1e-4);
}

#[test]
fn derived_figures_on_round_numbers() {
    assert_eq!(cost_reduction(0.10, 0.20), 0.5);
    assert_eq!(cost_reduction(0.3, 0.3), 0.0);
    assert_eq!(care_improvement(0.75, 0.50), 0.5);
    assert_eq!(care_improvement(0.4, 0.4), 0.0);
    assert!(cost_reduction(0.2, 0.1) < 0.0);
}

fn stays_strategy() -> impl Strategy<Value = Vec<(Vec<f64>, bool)>> {
    let stay = (prop::collection::vec(0u8..20, 1..6), any::<bool>())
        .prop_map(|(d, l)| (d.into_iter().map(|v| v as f64 / 20.0).collect::<Vec<_>>(), l));
    prop::collection::vec(stay, 2..60).prop_map(|mut v| {
        v[0].1 = true;
        v[1].1 = false;
        v
    })
}

proptest! {
    #[test]
    fn curve_agrees_with_oracle(stays in stays_strategy(), target in 0.0f64..=1.0) {
        prop_assert_eq!(check_metric_set(&stays, &[target]), Ok(()));
    }

    #[test]
    fn sensitivity_rises_as_threshold_falls(stays in stays_strategy()) {
        let curve = staymetrics::pr_curve(&to_stay_scores(&stays)).unwrap();
        let pos = stays.iter().filter(|s| s.1).count();
        for w in curve.points.windows(2) {
            prop_assert!(w[1].threshold < w[0].threshold);
            prop_assert!(w[1].sensitivity >= w[0].sensitivity);
            prop_assert!(w[1].counts.vp + w[1].counts.fp > w[0].counts.vp + w[0].counts.fp);
        }
        for p in &curve.points {
            let c = p.counts;
            prop_assert_eq!(c.vp + c.fp + c.fn_ + c.vn, stays.len());
            prop_assert_eq!(c.vp + c.fn_, pos);
            prop_assert!((0.0..=1.0).contains(&p.precision));
        }
        prop_assert_eq!(curve.points.last().unwrap().sensitivity, 1.0);
    }

    #[test]
    fn increasing_transform_keeps_the_curve(stays in stays_strategy()) {
        let warped: Vec<_> = stays.iter().map(|(d, l)| (d.iter().map(|v| (3.0 * v).exp() - 7.0).collect::<Vec<_>>(), *l)).collect();
        let a = staymetrics::pr_curve(&to_stay_scores(&stays)).unwrap();
        let b = staymetrics::pr_curve(&to_stay_scores(&warped)).unwrap();
        prop_assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            prop_assert_eq!(p.counts, q.counts);
            prop_assert_eq!((p.sensitivity, p.precision), (q.sensitivity, q.precision));
        }
    }

    #[test]
    fn day_order_does_not_matter(stays in stays_strategy()) {
        let reversed: Vec<_> = stays.iter().map(|(d, l)| (d.iter().rev().copied().collect::<Vec<_>>(), *l)).collect();
        let a = staymetrics::pr_curve(&to_stay_scores(&stays)).unwrap();
        let b = staymetrics::pr_curve(&to_stay_scores(&reversed)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sensitivity_at_precision_is_the_best_qualifying_point(stays in stays_strategy(), target in 0.0f64..=1.0) {
        let curve = staymetrics::pr_curve(&to_stay_scores(&stays)).unwrap();
        let best = curve.points.iter().skip(1).filter(|p| p.precision >= target).map(|p| p.sensitivity).fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))));
        match staymetrics::sensitivity_at_precision(&curve, target) {
            Ok(p) => {
                prop_assert_eq!(Some(p.sensitivity), best);
                let larger = curve.points.iter().skip(1).any(|q| q.threshold > p.threshold && q.precision >= target && q.sensitivity == p.sensitivity);
                prop_assert!(!larger);
            }
            Err(_) => prop_assert_eq!(best, None),
        }
    }
}

#[test]
fn f32_and_f64_curves_agree_on_exact_grid() {
    let mut r = rng(3);
    let stays = random_stays(&mut r, 300);
    let a = staymetrics::pr_curve(&to_stay_scores(&stays)).unwrap();
    let s32: Vec<StayScore<f32>> = stays
        .iter()
        .enumerate()
        .map(|(i, (d, l))| StayScore::new(format!("s{i}"), d.iter().map(|&v| v as f32).collect(), *l).unwrap())
        .collect();
    let b = staymetrics::pr_curve(&s32).unwrap();
    assert_eq!(a.points.len(), b.points.len());
    for (p, q) in a.points.iter().zip(&b.points) {
        assert_eq!(p.counts, q.counts);
    }
}

#[test]
fn score_file_round_trip() {
    let rows = vec![
        ("a".to_string(), 0, 0.25, true),
        ("a".to_string(), 1, 0.75, true),
        ("b".to_string(), 0, 0.5, false),
    ];
    let mut buf = Vec::new();
    staymetrics::write_scores(&rows, &mut buf).unwrap();
    let stays = staymetrics::read_scores("scores.csv", buf.as_slice()).unwrap();
    assert_eq!(stays.len(), 2);
    assert_eq!(stays[0].aggregate, 0.75);
    assert_eq!(stays[1].day_scores, vec![0.5]);
}
