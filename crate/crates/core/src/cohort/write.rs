use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{CohortStore, EventValue, BRADEN_CHANNEL, INJURY_CHANNEL};
use crate::error::{Error, Result};

/// Writes the store in canonical form: patients and stays by id, each stay's
/// rows sorted by `(timestamp, channel, value_kind, value)`.
pub fn write_cohort<P: Write, S: Write, E: Write>(
    store: &CohortStore,
    patients: P,
    stays: S,
    events: E,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(patients);
    w.write_record(["patient_id", "birth_date", "sex"])?;
    for p in store.patients.values() {
        w.write_record([
            p.patient_id.as_str(),
            &p.birth_date.format("%Y-%m-%d").to_string(),
            p.sex.as_str(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(stays);
    w.write_record(["stay_id", "patient_id", "admit_time", "discharge_time"])?;
    for s in store.stays.values() {
        let r = &s.record;
        w.write_record([
            r.stay_id.as_str(),
            r.patient_id.as_str(),
            &r.admit_time.to_string(),
            &r.discharge_time.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_writer(events);
    w.write_record(["stay_id", "timestamp", "channel", "value_kind", "value"])?;
    for s in store.stays.values() {
        let mut rows: Vec<(i64, &str, &'static str, String)> = Vec::with_capacity(
            s.events.len() + s.braden.len() + s.injuries.len(),
        );
        for e in &s.events {
            rows.push((e.timestamp.0, &e.channel, e.value.kind().as_str(), e.value.render()));
        }
        for b in &s.braden {
            let v = EventValue::Numeric(b.total as f64);
            rows.push((b.timestamp.0, BRADEN_CHANNEL, v.kind().as_str(), v.render()));
        }
        for i in &s.injuries {
            let v = i.stage.as_event_value();
            rows.push((i.timestamp.0, INJURY_CHANNEL, v.kind().as_str(), v.render()));
        }
        rows.sort();
        for (t, channel, kind, value) in rows {
            w.write_record([
                s.record.stay_id.as_str(),
                &crate::time::Timestamp(t).to_string(),
                channel,
                kind,
                &value,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_cohort_dir(store: &CohortStore, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| {
        let p = dir.join(name);
        File::create(&p)
            .map(BufWriter::new)
            .map_err(|e| Error::io(p, e))
    };
    write_cohort(
        store,
        create("patients.csv")?,
        create("stays.csv")?,
        create("events.csv")?,
    )
    .map_err(|e| Error::io(dir, e))
}
