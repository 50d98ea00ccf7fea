use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::attacks::ReconstructionResult;
use crate::data::Schema;
use crate::error::{Error, Result};
use crate::harness::experiments::{CsvTable, ExperimentReport};

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

pub fn write_csv(path: &Path, table: &CsvTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(&table.columns)
        .map_err(|e| io_err(path, e))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes `summary.json`, one CSV per table and `trials.txt` (when there
/// are per-trial lines) into `dir`. Returns the paths written.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();
    let summary = dir.join("summary.json");
    write_json(&summary, report)?;
    written.push(summary);
    for table in &report.tables {
        let path = dir.join(format!("{}.csv", table.name));
        write_csv(&path, table)?;
        written.push(path);
    }
    if !report.detail.is_empty() {
        let path = dir.join("trials.txt");
        let mut f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        for line in &report.detail {
            writeln!(f, "{line}").map_err(|e| io_err(&path, e))?;
        }
        written.push(path);
    }
    Ok(written)
}

/// Scores a reconstruction against the true counts.
/// Columns: value, true_count, estimate, raw, correct.
pub fn reconstruction_table(
    result: &ReconstructionResult,
    schema: &Schema,
    truth: &[u64],
) -> Result<CsvTable> {
    if truth.len() != result.values.len() {
        return Err(Error::Invariant(format!(
            "{} true counts for {} estimates",
            truth.len(),
            result.values.len()
        )));
    }
    let mut table = CsvTable::new(
        "reconstruction",
        &["value", "true_count", "estimate", "raw", "correct"],
    );
    for (v, &t) in result.values.iter().zip(truth) {
        let label = schema.label(result.attr, v.value).unwrap_or("?");
        table.push(vec![
            label.to_string(),
            t.to_string(),
            v.estimate.to_string(),
            v.raw.to_string(),
            (v.estimate == t).to_string(),
        ]);
    }
    Ok(table)
}
