//! CSV and JSON report files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::runner::TrialReport;
use crate::BenchError;

pub const CSV_HEADER: [&str; 10] =
    ["experiment_id", "trial", "estimator", "p", "n", "eps", "scenario", "err_op", "err_loc", "seconds"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(BenchError::Config(format!("unknown format {s:?} (csv or json)"))),
        }
    }
}

/// Floats use the shortest round-trip form; a missing location error is an
/// empty field.
pub fn write_csv<W: Write>(report: &TrialReport, out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &report.rows {
        w.write_record([
            r.experiment_id.clone(),
            r.trial.to_string(),
            r.estimator.clone(),
            r.p.to_string(),
            r.n.to_string(),
            r.eps.to_string(),
            r.scenario.clone(),
            r.err_op.to_string(),
            r.err_loc.map(|e| e.to_string()).unwrap_or_default(),
            r.seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with `rows` and `aggregates`.
pub fn write_json<W: Write>(report: &TrialReport, out: W) -> Result<(), BenchError> {
    let mut out = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn to_csv_string(report: &TrialReport) -> Result<String, BenchError> {
    let mut buf = Vec::new();
    write_csv(report, &mut buf)?;
    String::from_utf8(buf).map_err(|e| BenchError::Config(e.to_string()))
}

pub fn export(report: &TrialReport, path: &Path, format: Format) -> Result<(), BenchError> {
    let file = File::create(path)?;
    match format {
        Format::Csv => write_csv(report, file),
        Format::Json => write_json(report, file),
    }
}

/// Reads a JSON report written by [`write_json`].
pub fn read_json(path: &Path) -> Result<TrialReport, BenchError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
