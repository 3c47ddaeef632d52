use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::compare::ComparisonReport;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Plotdata,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Plotdata];

    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Json => "report.json",
            ReportFormat::Csv => "report.csv",
            ReportFormat::Plotdata => "plotdata.csv",
        }
    }
}

pub const CSV_HEADER: [&str; 5] = ["strategy", "ar", "mdd", "sharpe", "risk"];
pub const PLOT_HEADER: [&str; 4] = ["strategy", "series", "day", "value"];

/// Writes `report` into `dir` in the given format and returns the file path.
pub fn emit_report(report: &ComparisonReport, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format.file_name());
    let file = BufWriter::new(File::create(&path)?);
    match format {
        ReportFormat::Json => write_json(report, file)?,
        ReportFormat::Csv => write_table(report, file)?,
        ReportFormat::Plotdata => write_plotdata(report, file)?,
    }
    Ok(path)
}

pub fn write_json<W: Write, T: Serialize>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn write_table<W: Write>(report: &ComparisonReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in &report.rows {
        w.write_record([
            row.strategy.clone(),
            row.ar.to_string(),
            row.mdd.to_string(),
            row.sharpe.to_string(),
            row.risk.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: equity, risk and adjustment series per strategy and day.
pub fn write_plotdata<W: Write>(report: &ComparisonReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PLOT_HEADER)?;
    for row in &report.rows {
        // equity has one more point than the per-step series; its first point is C0
        let days = row.risk_curve.len();
        let equity = &row.equity_curve[1..];
        for (series, values) in [
            ("equity", equity),
            ("risk", &row.risk_curve[..]),
            ("adjustment", &row.adjustment_curve[..]),
        ] {
            for (day, v) in values.iter().take(days).enumerate() {
                w.write_record([row.strategy.as_str(), series, &day.to_string(), &v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
