//! CSV tables and the `summary.json` index of a lab run.

use std::fs;
use std::path::{Path, PathBuf};

use kinetic_core::fit::ExponentFit;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, LabError, Result};
use crate::sweep::{SweepResult, Verdict};

pub const SUMMARY: &str = "summary.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: String,
    pub results: Vec<ResultSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub name: String,
    pub kind: String,
    pub table: String,
    pub passed: bool,
    pub fits: Vec<(String, ExponentFit)>,
    pub verdicts: Vec<Verdict>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    /// One line per verdict, `PASS`/`FAIL` first.
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.results {
            for v in &r.verdicts {
                let tag = if v.passed { "PASS" } else { "FAIL" };
                out.push(format!("{tag} {} {}: {:e} ({})", r.name, v.criterion, v.value, v.bound));
            }
        }
        out
    }
}

pub fn write_table(path: &Path, r: &SweepResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&r.columns)?;
    for row in &r.rows {
        w.write_record(row)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rd = csv::Reader::from_path(path)?;
    let header = rd.headers()?.iter().map(String::from).collect();
    let rows = rd
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

/// Writes one CSV per result plus `summary.json` into `dir`.
pub fn write_report(dir: &Path, config: &str, results: &[SweepResult]) -> Result<Summary> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut summary = Summary {
        config: config.to_string(),
        results: Vec::new(),
    };
    for r in results {
        let table = format!("{}.csv", r.name);
        write_table(&dir.join(&table), r)?;
        summary.results.push(ResultSummary {
            name: r.name.clone(),
            kind: r.kind.clone(),
            table,
            passed: r.passed(),
            fits: r.fits.clone(),
            verdicts: r.verdicts.clone(),
        });
    }
    let path = dir.join(SUMMARY);
    let json = serde_json::to_string_pretty(&summary)?;
    fs::write(&path, json).map_err(io_err(&path))?;
    Ok(summary)
}

/// Reads `summary.json` back and checks that every listed table exists.
pub fn read_report(dir: &Path) -> Result<Summary> {
    let path: PathBuf = dir.join(SUMMARY);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let summary: Summary = serde_json::from_str(&text)?;
    if summary.results.is_empty() {
        return Err(LabError::EmptyReport);
    }
    for r in &summary.results {
        read_table(&dir.join(&r.table))?;
    }
    Ok(summary)
}
