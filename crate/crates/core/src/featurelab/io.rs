use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::spec::{FeatureSpec, OutputKind};
use super::{DayDataset, DayExample, FeatureValue};
use crate::error::{Error, Result};

const TRAILING: [&str; 4] = ["stay_id", "day_index", "label", "latest_braden"];

/// Refuses the synthetic generator's ground-truth file as extractor input.
pub fn ensure_not_oracle(path: &Path) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    if name.eq_ignore_ascii_case(crate::synthgen::ORACLE_FILE) {
        return Err(Error::Schema(format!(
            "{}: the oracle file is test-only and cannot feed feature extraction",
            path.display()
        )));
    }
    Ok(())
}

fn render(v: &FeatureValue) -> String {
    match v {
        FeatureValue::Numeric(x) => x.to_string(),
        FeatureValue::Boolean(b) => b.to_string(),
        FeatureValue::Category(c) => c.clone(),
        FeatureValue::Missing => String::new(),
    }
}

/// Header is the feature names followed by `stay_id,day_index,label,latest_braden`.
/// Missing values are empty fields.
pub fn write_dataset<W: Write>(ds: &DayDataset, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = ds
        .schema
        .iter()
        .map(|s| s.name.as_str())
        .chain(TRAILING)
        .collect();
    w.write_record(&header)?;
    for row in &ds.rows {
        let mut rec: Vec<String> = row.features.iter().map(render).collect();
        rec.push(row.stay_id.clone());
        rec.push(row.day_index.to_string());
        rec.push(row.label.to_string());
        rec.push(row.latest_braden.map(|b| b.to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()
}

/// Reads a dataset file written by [`write_dataset`]. Column kinds come from
/// `specs`, whose names must match the header. Stay labels are the OR of day
/// labels, which equals "injury during the stay" for every stay with rows.
pub fn read_dataset<R: Read>(file: &str, input: R, specs: &[FeatureSpec]) -> Result<DayDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let malformed = |line: u64, column: &str, message: &str| Error::Malformed {
        file: file.to_string(),
        line,
        column: column.to_string(),
        message: message.to_string(),
    };
    let headers = rdr
        .headers()
        .map_err(|e| malformed(1, "-", &e.to_string()))?
        .clone();
    let expected: Vec<&str> = specs.iter().map(|s| s.name.as_str()).chain(TRAILING).collect();
    let actual: Vec<&str> = headers.iter().collect();
    if actual != expected {
        return Err(Error::Schema(format!(
            "{file}: header does not match the feature schema ({} columns expected, {} found)",
            expected.len(),
            actual.len()
        )));
    }
    let n = specs.len();
    let mut rows = Vec::new();
    let mut stay_labels: BTreeMap<String, bool> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| malformed(e.position().map_or(0, |p| p.line()), "-", &e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut features = Vec::with_capacity(n);
        for (i, spec) in specs.iter().enumerate() {
            let raw = &rec[i];
            let v = if raw.is_empty() {
                FeatureValue::Missing
            } else {
                match spec.output_kind {
                    OutputKind::Numeric => FeatureValue::Numeric(
                        raw.parse().map_err(|_| malformed(line, &spec.name, "expected a number"))?,
                    ),
                    OutputKind::Boolean => FeatureValue::Boolean(
                        raw.parse().map_err(|_| malformed(line, &spec.name, "expected true/false"))?,
                    ),
                    OutputKind::Category => FeatureValue::Category(raw.to_string()),
                }
            };
            features.push(v);
        }
        let stay_id = rec[n].to_string();
        let day_index = rec[n + 1]
            .parse()
            .map_err(|_| malformed(line, "day_index", "expected a non-negative integer"))?;
        let label: bool = rec[n + 2]
            .parse()
            .map_err(|_| malformed(line, "label", "expected true/false"))?;
        let latest_braden = match &rec[n + 3] {
            "" => None,
            s => Some(s.parse().map_err(|_| malformed(line, "latest_braden", "expected 6..23"))?),
        };
        *stay_labels.entry(stay_id.clone()).or_insert(false) |= label;
        rows.push(DayExample {
            stay_id,
            day_index,
            features,
            label,
            latest_braden,
        });
    }
    Ok(DayDataset {
        schema: specs.to_vec(),
        rows,
        stay_labels,
    })
}

pub fn read_dataset_file(path: &Path, specs: &[FeatureSpec]) -> Result<DayDataset> {
    ensure_not_oracle(path)?;
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(&path.display().to_string(), std::io::BufReader::new(f), specs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurelab::{Aggregation, Window};

    fn specs() -> Vec<FeatureSpec> {
        vec![
            FeatureSpec::new("hr", "heart_rate", Window::Last24h, Aggregation::Mean, OutputKind::Numeric),
            FeatureSpec::new("vaso", "vasopressor", Window::Last24h, Aggregation::Exists, OutputKind::Boolean),
            FeatureSpec::new("unit", "care_unit", Window::SinceAdmission, Aggregation::Last, OutputKind::Category),
        ]
    }

    #[test]
    fn write_then_read_preserves_rows() {
        let ds = DayDataset {
            schema: specs(),
            rows: vec![
                DayExample {
                    stay_id: "S1".into(),
                    day_index: 0,
                    features: vec![FeatureValue::Numeric(71.25), FeatureValue::Boolean(true), FeatureValue::Missing],
                    label: false,
                    latest_braden: Some(18),
                },
                DayExample {
                    stay_id: "S1".into(),
                    day_index: 1,
                    features: vec![FeatureValue::Missing, FeatureValue::Boolean(false), FeatureValue::Category("MICU-A".into())],
                    label: true,
                    latest_braden: None,
                },
            ],
            stay_labels: [("S1".to_string(), true)].into_iter().collect(),
        };
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("hr,vaso,unit,stay_id,day_index,label,latest_braden\n"));
        assert!(text.contains("\n,false,MICU-A,S1,1,true,\n"));
        let back = read_dataset("d.csv", buf.as_slice(), &specs()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn header_mismatch_is_schema_error() {
        let text = "hr,vaso,stay_id,day_index,label,latest_braden\n";
        assert!(matches!(read_dataset("d.csv", text.as_bytes(), &specs()), Err(Error::Schema(_))));
    }

    #[test]
    fn oracle_file_is_refused() {
        assert!(ensure_not_oracle(Path::new("/tmp/run/oracle.csv")).is_err());
        assert!(ensure_not_oracle(Path::new("/tmp/run/events.csv")).is_ok());
    }
}
