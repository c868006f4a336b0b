//! Report files: JSON, aligned text and CSV tables, per-row curve CSVs and
//! one SVG precision/sensitivity plot.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::{CurvePoint, MetricsRow, Report};
use crate::error::{Error, Result};

const PALETTE: [&str; 6] = ["#222222", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}%", 100.0 * v))
}

fn signed_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{:+.2}%", 100.0 * v))
}

/// Header and one line of cells per row; the baseline comes first.
pub fn table_cells(report: &Report) -> (Vec<String>, Vec<Vec<String>>) {
    let target = format!("{:.0}%", 100.0 * report.target_sensitivity);
    let reference = format!("{:.2}%", 100.0 * report.reference_precision);
    let header = vec![
        "Model".to_string(),
        format!("Precision @ {target} sens."),
        format!("Sensitivity @ {reference} prec."),
        format!("Curve precision @ {target} sens."),
        format!("Curve sensitivity @ {:.2}% prec.", 100.0 * report.curve_reference_precision),
        "Cost reduction".to_string(),
        "Care improvement".to_string(),
    ];
    let row = |m: &MetricsRow| {
        vec![
            m.name.clone(),
            pct(m.test_at_target.precision),
            pct(m.test_at_reference.sensitivity),
            pct(Some(m.curve_precision_at_target)),
            pct(m.curve_sensitivity_at_reference),
        ]
    };
    let mut rows = vec![row(&report.baseline)];
    rows[0].extend(["-".to_string(), "-".to_string()]);
    for m in &report.models {
        let mut r = row(&m.metrics);
        r.push(signed_pct(m.derived.cost_reduction));
        r.push(signed_pct(m.derived.care_improvement));
        rows.push(r);
    }
    (header, rows)
}

pub fn render_text_table(report: &Report) -> String {
    let (header, rows) = table_cells(report);
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "  {c:>w$}");
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = format!(
        "Test-set metrics: {} test stays ({} with incidence), seed {}\n\n",
        report.split.test_stays, report.split.test_positive_stays, report.seed
    );
    out += &line(&header);
    out += &line(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>());
    for r in &rows {
        out += &line(r);
    }
    out += "\nThresholds are fixed on training stays; curve columns are read off the test curve.\n";
    out
}

pub fn render_csv_table(report: &Report) -> String {
    let (header, rows) = table_cells(report);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in &rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn render_curve_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from("threshold,sensitivity,precision\n");
    for p in points {
        let t = p.threshold.map_or_else(|| "inf".to_string(), |t| t.to_string());
        let _ = writeln!(s, "{t},{},{}", p.sensitivity, p.precision);
    }
    s
}

pub fn render_svg(report: &Report) -> String {
    let (w, h) = (640.0, 480.0);
    let (left, right, top, bottom) = (64.0, 180.0, 24.0, 56.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let x = |s: f64| left + s * pw;
    let y = |p: f64| top + (1.0 - p) * ph;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for i in 0..=10 {
        let v = i as f64 / 10.0;
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#e5e5e5\"/>",
            x(v), y(0.0), x(v), y(1.0)
        );
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#e5e5e5\"/>",
            x(0.0), y(v), x(1.0), y(v)
        );
        if i % 2 == 0 {
            let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{v:.1}</text>", x(v), y(0.0) + 16.0);
            let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{v:.1}</text>", x(0.0) - 6.0, y(v) + 4.0);
        }
    }
    let _ = writeln!(
        s,
        "<rect x=\"{left}\" y=\"{top}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#444444\"/>"
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">Sensitivity</text>",
        x(0.5),
        h - 16.0
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">Precision</text>",
        y(0.5),
        y(0.5)
    );
    let rows = std::iter::once(&report.baseline).chain(report.models.iter().map(|m| &m.metrics));
    for (i, m) in rows.enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let dash = if i == 0 { " stroke-dasharray=\"6 4\"" } else { "" };
        let pts: Vec<String> = m
            .curve
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.sensitivity), y(p.precision)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>",
            pts.join(" ")
        );
        let ly = top + 12.0 + 20.0 * i as f64;
        let lx = left + pw + 16.0;
        let _ = writeln!(
            s,
            "<line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{colour}\" stroke-width=\"2\"{dash}/>",
            lx + 24.0
        );
        let _ = writeln!(s, "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>", lx + 30.0, ly + 4.0, escape(&m.name));
    }
    s += "</svg>\n";
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes every report file into `dir` and returns their paths.
pub fn emit_report(report: &Report, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let curves = dir.join("curves");
    fs::create_dir_all(&curves).map_err(|e| Error::io(&curves, e))?;
    let mut files = vec![
        (dir.join("report.json"), report.to_json()),
        (dir.join("table.txt"), render_text_table(report)),
        (dir.join("table.csv"), render_csv_table(report)),
        (dir.join("pr_curves.svg"), render_svg(report)),
    ];
    for m in std::iter::once(&report.baseline).chain(report.models.iter().map(|m| &m.metrics)) {
        files.push((curves.join(format!("{}.csv", m.code)), render_curve_csv(&m.curve)));
    }
    for (path, text) in &files {
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
