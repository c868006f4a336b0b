use super::CohortStore;

/// Patients younger than this (whole years at admission) are excluded.
pub const MIN_AGE_YEARS: i32 = 18;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub removed_underage: usize,
    pub removed_no_braden: usize,
    pub removed_patients: usize,
    pub stays_with_incidence: usize,
}

/// Removes stays of minors and stays without any Braden reading, then drops
/// patients left without stays. Never fails.
pub fn apply_filters(store: &CohortStore) -> (CohortStore, FilterReport) {
    let mut report = FilterReport::default();
    let mut out = CohortStore::default();
    for (id, stay) in &store.stays {
        match store.age_at_admit(stay) {
            Some(age) if age >= MIN_AGE_YEARS => {}
            _ => {
                report.removed_underage += 1;
                continue;
            }
        }
        if stay.braden.is_empty() {
            report.removed_no_braden += 1;
            continue;
        }
        if stay.first_stage2_time().is_some() {
            report.stays_with_incidence += 1;
        }
        out.stays.insert(id.clone(), stay.clone());
    }
    for (id, patient) in &store.patients {
        if out.stays.values().any(|s| &s.record.patient_id == id) {
            out.patients.insert(id.clone(), patient.clone());
        } else {
            report.removed_patients += 1;
        }
    }
    (out, report)
}
