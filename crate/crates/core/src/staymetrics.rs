//! Stay-level evaluation of daily risk scores.
//!
//! A stay is flagged when any of its days is flagged, which for a single
//! threshold is the same as thresholding the maximum day score. Sensitivity
//! and precision are counted over stays, never over days.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cohort::{CohortStore, StayDay};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Braden totals are mapped to `BRADEN_RISK_OFFSET - total` so higher is riskier.
pub const BRADEN_RISK_OFFSET: u8 = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StayScore<T> {
    pub stay_id: String,
    pub day_scores: Vec<T>,
    pub aggregate: T,
    pub stay_label: bool,
}

impl<T: Scalar> StayScore<T> {
    pub fn new(stay_id: impl Into<String>, day_scores: Vec<T>, stay_label: bool) -> Result<Self> {
        let stay_id = stay_id.into();
        let aggregate = aggregate(&day_scores).map_err(|_| Error::NoScoredDays(stay_id.clone()))?;
        Ok(Self {
            stay_id,
            day_scores,
            aggregate,
            stay_label,
        })
    }
}

/// OR-aggregation of day scores: the maximum.
pub fn aggregate<T: Scalar>(day_scores: &[T]) -> Result<T> {
    day_scores
        .iter()
        .copied()
        .reduce(|a, b| if b > a { b } else { a })
        .ok_or_else(|| Error::NoScoredDays(String::new()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub vp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub vn: usize,
}

impl ConfusionCounts {
    pub fn sensitivity(&self) -> Option<f64> {
        let pos = self.vp + self.fn_;
        (pos > 0).then(|| self.vp as f64 / pos as f64)
    }

    /// `None` when nothing is flagged.
    pub fn precision(&self) -> Option<f64> {
        let flagged = self.vp + self.fp;
        (flagged > 0).then(|| self.vp as f64 / flagged as f64)
    }
}

/// Tallies stays whose aggregate is `>= threshold` as predicted positive.
pub fn confusion<T: Scalar>(stays: &[StayScore<T>], threshold: T) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for s in stays {
        match (s.aggregate >= threshold, s.stay_label) {
            (true, true) => c.vp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.vn += 1,
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OperatingPoint<T> {
    pub threshold: T,
    pub sensitivity: f64,
    pub precision: f64,
    pub counts: ConfusionCounts,
}

impl<T: Scalar> OperatingPoint<T> {
    pub fn is_sentinel(&self) -> bool {
        self.threshold.is_infinite() && self.threshold > T::zero()
    }
}

/// Exact threshold sweep: a `+inf` sentinel `(sens 0, prec 1)` followed by one
/// point per distinct aggregate, by descending threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PrCurve<T> {
    pub points: Vec<OperatingPoint<T>>,
}

pub fn pr_curve<T: Scalar>(stays: &[StayScore<T>]) -> Result<PrCurve<T>> {
    let positives = stays.iter().filter(|s| s.stay_label).count();
    let negatives = stays.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels(format!(
            "a curve needs both classes ({positives} positive, {negatives} negative stays)"
        )));
    }
    let mut order: Vec<(T, bool)> = stays.iter().map(|s| (s.aggregate, s.stay_label)).collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores are not NaN"));

    let mut points = Vec::with_capacity(order.len() + 1);
    points.push(OperatingPoint {
        threshold: T::infinity(),
        sensitivity: 0.0,
        precision: 1.0,
        counts: ConfusionCounts {
            vp: 0,
            fp: 0,
            fn_: positives,
            vn: negatives,
        },
    });
    let (mut vp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = order[i].0;
        while i < order.len() && order[i].0 == t {
            if order[i].1 {
                vp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(OperatingPoint {
            threshold: t,
            sensitivity: vp as f64 / positives as f64,
            precision: vp as f64 / (vp + fp) as f64,
            counts: ConfusionCounts {
                vp,
                fp,
                fn_: positives - vp,
                vn: negatives - fp,
            },
        });
    }
    Ok(PrCurve { points })
}

/// The largest threshold whose sensitivity reaches `target`.
pub fn precision_at_sensitivity<T: Scalar>(curve: &PrCurve<T>, target: f64) -> Result<OperatingPoint<T>> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Unachievable(format!("sensitivity target {target} outside [0, 1]")));
    }
    curve
        .points
        .iter()
        .find(|p| p.sensitivity >= target)
        .copied()
        .ok_or_else(|| Error::Unachievable(format!("no threshold reaches sensitivity {target}")))
}

/// Among non-sentinel points with precision `>= target`, the one with the
/// highest sensitivity; ties go to the larger threshold.
pub fn sensitivity_at_precision<T: Scalar>(curve: &PrCurve<T>, target: f64) -> Result<OperatingPoint<T>> {
    let mut best: Option<&OperatingPoint<T>> = None;
    for p in curve.points.iter().filter(|p| !p.is_sentinel() && p.precision >= target) {
        if best.is_none_or(|b| p.sensitivity > b.sensitivity) {
            best = Some(p);
        }
    }
    best.copied()
        .ok_or_else(|| Error::Unachievable(format!("no threshold reaches precision {target}")))
}

/// Groups `(stay_id, score)` pairs into stay scores. Stays missing from
/// `labels` are an error; labelled stays without any scored day are skipped
/// and counted in the second return value.
pub fn collect_stay_scores<'a, T: Scalar>(
    day_scores: impl IntoIterator<Item = (&'a str, T)>,
    labels: &BTreeMap<String, bool>,
) -> Result<(Vec<StayScore<T>>, usize)> {
    let mut grouped: BTreeMap<&str, Vec<T>> = BTreeMap::new();
    for (id, s) in day_scores {
        grouped.entry(id).or_default().push(s);
    }
    let mut out = Vec::with_capacity(grouped.len());
    for (id, scores) in grouped {
        let label = *labels
            .get(id)
            .ok_or_else(|| Error::Schema(format!("stay `{id}` has no label")))?;
        out.push(StayScore::new(id, scores, label)?);
    }
    let skipped = labels.len().saturating_sub(out.len());
    Ok((out, skipped))
}

/// Day score `24 - latest Braden total` charted by the day end or the first
/// stage-2+ injury, whichever comes first; days before the first reading are
/// skipped. Returns the stay scores and the number of stays excluded for
/// having no scored day.
pub fn braden_day_scores(store: &CohortStore, stay_days: &[StayDay]) -> (Vec<StayScore<f64>>, usize) {
    let mut grouped: BTreeMap<&str, (Vec<f64>, bool)> = BTreeMap::new();
    let mut seen: BTreeMap<&str, ()> = BTreeMap::new();
    for day in stay_days {
        let Some(stay) = store.stay(&day.stay_id) else { continue };
        seen.insert(stay.id(), ());
        let upper = stay.first_stage2_time().map_or(day.day_end, |t| t.min(day.day_end));
        if let Some(b) = stay.latest_braden(upper) {
            let e = grouped
                .entry(stay.id())
                .or_insert_with(|| (Vec::new(), stay.first_stage2_time().is_some()));
            e.0.push(braden_score(b));
        }
    }
    let excluded = seen.len() - grouped.len();
    let out = grouped
        .into_iter()
        .map(|(id, (scores, label))| StayScore::new(id, scores, label).expect("nonempty"))
        .collect();
    (out, excluded)
}

pub fn braden_score(total: u8) -> f64 {
    (BRADEN_RISK_OFFSET - total) as f64
}

/// Score file: `stay_id,day_index,score,stay_label`.
pub fn write_scores<W: Write>(rows: &[(String, u32, f64, bool)], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stay_id", "day_index", "score", "stay_label"])?;
    for (id, day, score, label) in rows {
        w.write_record([id.clone(), day.to_string(), score.to_string(), label.to_string()])?;
    }
    w.flush()
}

pub fn read_scores<R: Read>(file: &str, input: R) -> Result<Vec<StayScore<f64>>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut grouped: BTreeMap<String, (Vec<(u32, f64)>, bool)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Malformed {
            file: file.into(),
            line: e.position().map_or(0, |p| p.line()),
            column: "-".into(),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |column: &str| Error::Malformed {
            file: file.into(),
            line,
            column: column.into(),
            message: "unparsable value".into(),
        };
        if rec.len() != 4 {
            return Err(bad("-"));
        }
        let day: u32 = rec[1].parse().map_err(|_| bad("day_index"))?;
        let score: f64 = rec[2].parse().map_err(|_| bad("score"))?;
        let label: bool = rec[3].parse().map_err(|_| bad("stay_label"))?;
        let e = grouped.entry(rec[0].to_string()).or_insert((Vec::new(), label));
        if e.1 != label {
            return Err(bad("stay_label"));
        }
        e.0.push((day, score));
    }
    grouped
        .into_iter()
        .map(|(id, (mut days, label))| {
            days.sort_by_key(|d| d.0);
            StayScore::new(id, days.into_iter().map(|d| d.1).collect(), label)
        })
        .collect()
}

/// Curve file: `threshold,sensitivity,precision`, sentinel threshold written as `inf`.
pub fn write_curve<T: Scalar, W: Write>(curve: &PrCurve<T>, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "sensitivity", "precision"])?;
    for p in &curve.points {
        w.write_record([p.threshold.to_string(), p.sensitivity.to_string(), p.precision.to_string()])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn eight_stays() -> Vec<StayScore<f64>> {
        let pos = [0.9, 0.7, 0.4, 0.2];
        let neg = [0.8, 0.3, 0.1, 0.05];
        pos.iter()
            .enumerate()
            .map(|(i, &s)| StayScore::new(format!("p{i}"), vec![s], true).unwrap())
            .chain(neg.iter().enumerate().map(|(i, &s)| StayScore::new(format!("n{i}"), vec![s], false).unwrap()))
            .collect()
    }

    #[test]
    fn aggregate_is_max() {
        assert_eq!(aggregate(&[0.1, 0.7, 0.3]).unwrap(), 0.7);
        assert_eq!(aggregate(&[0.42]).unwrap(), 0.42);
        assert!(matches!(aggregate::<f64>(&[]), Err(Error::NoScoredDays(_))));
        assert!(matches!(StayScore::<f64>::new("s", vec![], true), Err(Error::NoScoredDays(id)) if id == "s"));
    }

    #[test]
    fn hand_tallied_confusion() {
        let c = confusion(&eight_stays(), 0.7);
        assert_eq!(c, ConfusionCounts { vp: 2, fp: 1, fn_: 2, vn: 3 });
        assert_eq!(c.sensitivity(), Some(0.5));
        assert_eq!(c.precision(), Some(2.0 / 3.0));
        let none = confusion(&eight_stays(), f64::INFINITY);
        assert_eq!((none.vp, none.fp), (0, 0));
        assert_eq!(none.precision(), None);
    }

    #[test]
    fn perfect_separation() {
        let stays = vec![
            StayScore::new("a", vec![1.0], true).unwrap(),
            StayScore::new("b", vec![0.0], false).unwrap(),
        ];
        let c = confusion(&stays, 0.5);
        assert_eq!((c.sensitivity(), c.precision()), (Some(1.0), Some(1.0)));
        let curve = pr_curve(&stays).unwrap();
        assert!(curve.points.iter().any(|p| p.sensitivity == 1.0 && p.precision == 1.0));
        assert_eq!(sensitivity_at_precision(&curve, 1.0).unwrap().threshold, 1.0);
    }

    #[test]
    fn eight_stay_curve_and_operating_points() {
        let curve = pr_curve(&eight_stays()).unwrap();
        assert_eq!(curve.points.len(), 9);
        assert!(curve.points[0].is_sentinel());
        let p = precision_at_sensitivity(&curve, 0.5).unwrap();
        assert_eq!(p.threshold, 0.7);
        assert_eq!(p.precision, 2.0 / 3.0);
        assert!(precision_at_sensitivity(&curve, 0.0).unwrap().is_sentinel());
        assert_eq!(precision_at_sensitivity(&curve, 1.0).unwrap().threshold, 0.2);
        // 0.2 flags all four positives and two negatives.
        let s = sensitivity_at_precision(&curve, 0.5).unwrap();
        assert_eq!((s.threshold, s.sensitivity, s.precision), (0.2, 1.0, 2.0 / 3.0));
        let s = sensitivity_at_precision(&curve, 0.7).unwrap();
        assert_eq!((s.threshold, s.sensitivity, s.precision), (0.4, 0.75, 0.75));
        let any = sensitivity_at_precision(&curve, 0.0).unwrap();
        assert_eq!((any.threshold, any.sensitivity), (0.2, 1.0));
        assert!(sensitivity_at_precision(&curve, 1.01).is_err());
        assert!(precision_at_sensitivity(&curve, 1.5).is_err());
    }

    #[test]
    fn equal_aggregates_give_two_points() {
        let stays = vec![
            StayScore::new("a", vec![0.3], true).unwrap(),
            StayScore::new("b", vec![0.3, 0.1], false).unwrap(),
        ];
        assert_eq!(pr_curve(&stays).unwrap().points.len(), 2);
    }

    #[test]
    fn single_class_curve_is_an_error() {
        let stays = vec![StayScore::new("a", vec![0.3], true).unwrap()];
        assert!(pr_curve(&stays).is_err());
    }

    #[test]
    fn braden_scores_follow_latest_reading() {
        use crate::cohort::fixtures::{patient, stay, store, ts};
        use crate::cohort::BradenReading;
        let admit = ts("2100-01-01T00:00:00Z");
        let mut s = stay("S1", "P1", admit, 72);
        for (h, total) in [(30, 18), (47, 12), (49, 20)] {
            s.braden.push(BradenReading::new(admit.plus_seconds(h * 3600), total, None).unwrap());
        }
        let mut single = stay("S2", "P1", admit.plus_days(10), 24);
        single.braden.push(BradenReading::new(admit.plus_days(10), 23, None).unwrap());
        let st = store(vec![patient("P1", "1950-01-01")], vec![s, single]);
        let days = crate::cohort::enumerate_stay_days(&st);
        let (scores, excluded) = braden_day_scores(&st, &days);
        assert_eq!(excluded, 0);
        // Day 0 (0-24h): no reading yet, skipped. Day 1 (24-48h): latest is 12
        // at 47h. Day 2 (48-72h): latest is 20 at 49h.
        assert_eq!(scores[0].day_scores, vec![12.0, 4.0]);
        assert_eq!(scores[0].aggregate, 12.0);
        assert_eq!(scores[1].aggregate, 1.0);
    }

    #[test]
    fn braden_after_the_injury_is_not_read() {
        use crate::cohort::fixtures::{patient, stay, store, ts};
        use crate::cohort::{BradenReading, InjuryEvent, InjuryStage};
        let admit = ts("2100-01-01T00:00:00Z");
        let mut s = stay("S1", "P1", admit, 72);
        for (h, total) in [(2, 18), (40, 7)] {
            s.braden.push(BradenReading::new(admit.plus_seconds(h * 3600), total, None).unwrap());
        }
        s.injuries.push(InjuryEvent { timestamp: admit.plus_seconds(36 * 3600), stage: InjuryStage::Stage(2) });
        let st = store(vec![patient("P1", "1950-01-01")], vec![s]);
        let days = crate::cohort::enumerate_stay_days(&st);
        let (scores, _) = braden_day_scores(&st, &days);
        assert_eq!(scores[0].day_scores, vec![6.0, 6.0]);
    }

    #[test]
    fn score_file_round_trip() {
        let rows = vec![
            ("S1".to_string(), 1, 0.25, true),
            ("S1".to_string(), 0, 0.5, true),
            ("S2".to_string(), 0, 0.125, false),
        ];
        let mut buf = Vec::new();
        write_scores(&rows, &mut buf).unwrap();
        let stays = read_scores("scores.csv", buf.as_slice()).unwrap();
        assert_eq!(stays.len(), 2);
        assert_eq!(stays[0].day_scores, vec![0.5, 0.25]);
        assert_eq!(stays[0].aggregate, 0.5);
        assert!(!stays[1].stay_label);
    }

    #[test]
    fn curve_file_has_one_row_per_point() {
        let curve = pr_curve(&eight_stays()).unwrap();
        let mut buf = Vec::new();
        write_curve(&curve, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), curve.points.len() + 1);
        assert!(text.lines().nth(1).unwrap().starts_with("inf,0,1"));
    }

    #[test]
    fn works_in_f32() {
        let stays: Vec<StayScore<f32>> = vec![
            StayScore::new("a", vec![0.9f32, 0.2], true).unwrap(),
            StayScore::new("b", vec![0.4f32], false).unwrap(),
        ];
        let curve = pr_curve(&stays).unwrap();
        assert_eq!(precision_at_sensitivity(&curve, 0.5).unwrap().threshold, 0.9f32);
    }
}
