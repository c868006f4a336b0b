use super::{CohortStore, Stay};
use crate::time::{Timestamp, SECONDS_PER_DAY};

/// An admission-anchored 24h window of a stay; the last one may be shorter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StayDay {
    pub stay_id: String,
    pub day_index: u32,
    pub day_start: Timestamp,
    pub day_end: Timestamp,
}

impl StayDay {
    pub fn for_stay(stay: &Stay) -> Vec<StayDay> {
        let admit = stay.record.admit_time;
        let discharge = stay.record.discharge_time;
        let cutoff = stay.first_stage2_time();
        let length = discharge.0 - admit.0;
        let n_days = (length + SECONDS_PER_DAY - 1) / SECONDS_PER_DAY;
        let mut out = Vec::with_capacity(n_days.max(0) as usize);
        for d in 0..n_days {
            let day_start = admit.plus_days(d);
            if cutoff.is_some_and(|t| day_start >= t) {
                break;
            }
            out.push(StayDay {
                stay_id: stay.record.stay_id.clone(),
                day_index: d as u32,
                day_start,
                day_end: day_start.plus_days(1).min(discharge),
            });
        }
        out
    }
}

/// All eligible stay-days ordered by `(stay_id, day_index)`.
pub fn enumerate_stay_days(store: &CohortStore) -> Vec<StayDay> {
    store.stays.values().flat_map(StayDay::for_stay).collect()
}
