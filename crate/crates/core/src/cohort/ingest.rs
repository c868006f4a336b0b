use std::collections::btree_map::Entry;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use csv::StringRecord;

use super::{
    BradenReading, ClinicalEvent, CohortStore, EventValue, InjuryEvent, InjuryStage,
    PatientRecord, Stay, StayRecord, ValueKind, BRADEN_CHANNEL, INJURY_CHANNEL,
};
use crate::error::{Error, Result};
use crate::time::{parse_date, Timestamp};

#[derive(Debug, Clone)]
pub struct CohortPaths {
    pub patients: PathBuf,
    pub stays: PathBuf,
    pub events: PathBuf,
}

impl CohortPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            patients: dir.join("patients.csv"),
            stays: dir.join("stays.csv"),
            events: dir.join("events.csv"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub patients: usize,
    pub stays: usize,
    /// Clinical events kept, excluding injury stagings and Braden readings.
    pub events: usize,
    pub injuries: usize,
    pub braden_readings: usize,
    /// Rows dropped because their timestamp lies outside the stay.
    pub dropped_out_of_window: usize,
}

impl IngestReport {
    pub fn warnings(&self) -> usize {
        self.dropped_out_of_window
    }
}

pub fn ingest_dir(dir: impl AsRef<Path>) -> Result<(CohortStore, IngestReport)> {
    ingest(&CohortPaths::in_dir(dir))
}

pub fn ingest(paths: &CohortPaths) -> Result<(CohortStore, IngestReport)> {
    let open = |p: &PathBuf| File::open(p).map_err(|e| Error::io(p, e));
    ingest_from(
        (&paths.patients.display().to_string(), open(&paths.patients)?),
        (&paths.stays.display().to_string(), open(&paths.stays)?),
        (&paths.events.display().to_string(), open(&paths.events)?),
    )
}

/// Ingests from arbitrary readers; each is paired with a name used in errors.
pub fn ingest_from<P: Read, S: Read, E: Read>(
    patients: (&str, P),
    stays: (&str, S),
    events: (&str, E),
) -> Result<(CohortStore, IngestReport)> {
    let mut store = CohortStore::default();
    let mut report = IngestReport::default();

    let mut table = Table::open(patients.0, patients.1, &["patient_id", "birth_date", "sex"])?;
    while let Some(row) = table.next_row()? {
        let patient_id = row.text(0)?;
        let birth_date = parse_date(row.raw(1))
            .ok_or_else(|| row.malformed(1, "expected a YYYY-MM-DD date"))?;
        let sex = row.raw(2).trim().to_string();
        match store.patients.entry(patient_id.clone()) {
            Entry::Occupied(_) => return Err(row.duplicate(patient_id)),
            Entry::Vacant(v) => {
                v.insert(PatientRecord {
                    patient_id,
                    birth_date,
                    sex,
                });
            }
        }
    }

    let mut table = Table::open(
        stays.0,
        stays.1,
        &["stay_id", "patient_id", "admit_time", "discharge_time"],
    )?;
    while let Some(row) = table.next_row()? {
        let stay_id = row.text(0)?;
        let patient_id = row.text(1)?;
        let admit_time = row.timestamp(2)?;
        let discharge_time = row.timestamp(3)?;
        if admit_time >= discharge_time {
            return Err(row.malformed(3, "discharge_time must be after admit_time"));
        }
        let patient = store
            .patients
            .get(&patient_id)
            .ok_or_else(|| row.dangling(&patient_id, "patient"))?;
        if patient.birth_date > admit_time.date() {
            return Err(row.malformed(2, "admission precedes the patient's birth date"));
        }
        match store.stays.entry(stay_id.clone()) {
            Entry::Occupied(_) => return Err(row.duplicate(stay_id)),
            Entry::Vacant(v) => {
                v.insert(Stay::new(StayRecord {
                    stay_id,
                    patient_id,
                    admit_time,
                    discharge_time,
                }));
            }
        }
    }

    let mut table = Table::open(
        events.0,
        events.1,
        &["stay_id", "timestamp", "channel", "value_kind", "value"],
    )?;
    while let Some(row) = table.next_row()? {
        let stay_id = row.raw(0).trim();
        let timestamp = row.timestamp(1)?;
        let channel = row.raw(2).trim();
        if channel.is_empty() {
            return Err(row.malformed(2, "channel must be nonempty"));
        }
        let kind = ValueKind::parse(row.raw(3).trim())
            .ok_or_else(|| row.malformed(3, "expected numeric, category or flag"))?;
        let value = row.raw(4);
        let stay = store
            .stays
            .get_mut(stay_id)
            .ok_or_else(|| row.dangling(stay_id, "stay"))?;

        // Validate before the window check so malformed rows always error.
        let parsed = match channel {
            INJURY_CHANNEL => {
                let stage = InjuryStage::parse(kind, value).ok_or_else(|| {
                    row.malformed(4, "injury stage must be 1..4, unstageable or deep_tissue")
                })?;
                Parsed::Injury(InjuryEvent { timestamp, stage })
            }
            BRADEN_CHANNEL => {
                let total = (kind == ValueKind::Numeric)
                    .then(|| value.trim().parse::<f64>().ok())
                    .flatten()
                    .filter(|v| v.fract() == 0.0 && (0.0..=255.0).contains(v))
                    .and_then(|v| BradenReading::new(timestamp, v as u8, None))
                    .ok_or_else(|| row.malformed(4, "Braden total must be an integer in 6..23"))?;
                Parsed::Braden(total)
            }
            _ => {
                let value = match kind {
                    ValueKind::Numeric => {
                        let v: f64 = value
                            .trim()
                            .parse()
                            .map_err(|_| row.malformed(4, "expected a number"))?;
                        if !v.is_finite() {
                            return Err(row.malformed(4, "numeric value must be finite"));
                        }
                        EventValue::Numeric(v)
                    }
                    ValueKind::Category => {
                        let v = value.trim();
                        if v.is_empty() {
                            return Err(row.malformed(4, "category value must be nonempty"));
                        }
                        EventValue::Category(v.to_string())
                    }
                    ValueKind::Flag => match value.trim() {
                        "true" | "1" => EventValue::Flag,
                        _ => return Err(row.malformed(4, "flag value must be `true`")),
                    },
                };
                Parsed::Event(ClinicalEvent {
                    timestamp,
                    channel: channel.to_string(),
                    value,
                })
            }
        };

        if timestamp < stay.record.admit_time || timestamp > stay.record.discharge_time {
            report.dropped_out_of_window += 1;
            continue;
        }
        match parsed {
            Parsed::Injury(i) => stay.injuries.push(i),
            Parsed::Braden(b) => stay.braden.push(b),
            Parsed::Event(e) => stay.events.push(e),
        }
    }

    for stay in store.stays.values_mut() {
        stay.sort();
        report.events += stay.events.len();
        report.injuries += stay.injuries.len();
        report.braden_readings += stay.braden.len();
    }
    report.patients = store.patients.len();
    report.stays = store.stays.len();
    Ok((store, report))
}

enum Parsed {
    Injury(InjuryEvent),
    Braden(BradenReading),
    Event(ClinicalEvent),
}

struct Table<'a, R: Read> {
    file: &'a str,
    reader: csv::Reader<R>,
    columns: Vec<usize>,
    names: &'static [&'static str],
    record: StringRecord,
}

impl<'a, R: Read> Table<'a, R> {
    fn open(file: &'a str, rdr: R, names: &'static [&'static str]) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(rdr);
        let headers = reader.headers().map_err(|e| csv_error(file, e))?.clone();
        let columns = names
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h.trim() == *name)
                    .ok_or_else(|| Error::Malformed {
                        file: file.to_string(),
                        line: 1,
                        column: name.to_string(),
                        message: "missing header column".into(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            file,
            reader,
            columns,
            names,
            record: StringRecord::new(),
        })
    }

    fn next_row(&mut self) -> Result<Option<Row<'_>>> {
        let more = self
            .reader
            .read_record(&mut self.record)
            .map_err(|e| csv_error(self.file, e))?;
        if !more {
            return Ok(None);
        }
        let line = self.record.position().map(|p| p.line()).unwrap_or(0);
        Ok(Some(Row {
            file: self.file,
            line,
            record: &self.record,
            columns: &self.columns,
            names: self.names,
        }))
    }
}

struct Row<'a> {
    file: &'a str,
    line: u64,
    record: &'a StringRecord,
    columns: &'a [usize],
    names: &'static [&'static str],
}

impl Row<'_> {
    fn raw(&self, col: usize) -> &str {
        self.record.get(self.columns[col]).unwrap_or("")
    }

    fn text(&self, col: usize) -> Result<String> {
        let v = self.raw(col).trim();
        if v.is_empty() {
            return Err(self.malformed(col, "value must be nonempty"));
        }
        Ok(v.to_string())
    }

    fn timestamp(&self, col: usize) -> Result<Timestamp> {
        Timestamp::parse(self.raw(col))
            .ok_or_else(|| self.malformed(col, "expected an ISO-8601 UTC timestamp"))
    }

    fn malformed(&self, col: usize, message: &str) -> Error {
        Error::Malformed {
            file: self.file.to_string(),
            line: self.line,
            column: self.names[col].to_string(),
            message: message.to_string(),
        }
    }

    fn duplicate(&self, key: String) -> Error {
        Error::DuplicateKey {
            file: self.file.to_string(),
            line: self.line,
            key,
        }
    }

    fn dangling(&self, key: &str, target: &'static str) -> Error {
        Error::DanglingReference {
            file: self.file.to_string(),
            line: self.line,
            key: key.to_string(),
            target,
        }
    }
}

fn csv_error(file: &str, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Malformed {
        file: file.to_string(),
        line,
        column: "-".into(),
        message: e.to_string(),
    }
}
