//! Report persistence: CSV records with a fixed column order, JSON with
//! summaries alongside.

use std::path::Path;

use crate::experiments::{monte_carlo_summary, AccuracyRecord, AccuracyReport};

pub const CSV_HEADER: &str = "stack,T,vg_read,L,sigma,trial,accuracy";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Records as CSV. Numbers use shortest round-trip formatting, which keeps
/// at least full double precision for every accuracy.
pub fn report_to_csv(report: &AccuracyReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.stack, r.temp, r.vg_read, r.levels, r.sigma, r.trial, r.accuracy
        ));
    }
    out
}

pub fn save_report_csv(report: &AccuracyReport, path: &Path) -> Result<(), ReportError> {
    std::fs::write(path, report_to_csv(report)).map_err(io_err(path))
}

pub fn save_report_json(report: &AccuracyReport, path: &Path) -> Result<(), ReportError> {
    let json = serde_json::to_string_pretty(report).expect("report serialize");
    std::fs::write(path, json).map_err(io_err(path))
}

/// Write both emission formats next to each other.
pub fn save_report(report: &AccuracyReport, dir: &Path, stem: &str) -> Result<(), ReportError> {
    save_report_csv(report, &dir.join(format!("{stem}.csv")))?;
    save_report_json(report, &dir.join(format!("{stem}.json")))
}

/// Reconstruct a report from its CSV emission; summaries are rebuilt from
/// the records.
pub fn load_report_csv(path: &Path) -> Result<AccuracyReport, ReportError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(ReportError::Parse {
                path: path.display().to_string(),
                line: 1,
                msg: format!("unexpected header '{header}'"),
            })
        }
        None => {
            return Err(ReportError::Parse {
                path: path.display().to_string(),
                line: 1,
                msg: "empty file".into(),
            })
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let parse = |msg: String| ReportError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(parse(format!("expected 7 fields, found {}", fields.len())));
        }
        records.push(AccuracyRecord {
            stack: fields[0].to_string(),
            temp: fields[1].parse().map_err(|e| parse(format!("T: {e}")))?,
            vg_read: fields[2].parse().map_err(|e| parse(format!("vg_read: {e}")))?,
            levels: fields[3].parse().map_err(|e| parse(format!("L: {e}")))?,
            sigma: fields[4].parse().map_err(|e| parse(format!("sigma: {e}")))?,
            trial: fields[5].parse().map_err(|e| parse(format!("trial: {e}")))?,
            accuracy: fields[6].parse().map_err(|e| parse(format!("accuracy: {e}")))?,
        });
    }
    let summaries = monte_carlo_summary(&records);
    Ok(AccuracyReport { records, summaries })
}

pub fn load_report_json(path: &Path) -> Result<AccuracyReport, ReportError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ReportError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        msg: e.to_string(),
    })
}
