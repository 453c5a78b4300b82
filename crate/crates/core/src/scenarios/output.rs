//! Run directory layout:
//!
//! ```text
//! config.json      resolved scenario configuration
//! series.csv       one row per state
//! audit.csv        one row per audited step
//! snapshots/       snap_NNNNNNN.bin, written in consecutive pairs
//! ```
//!
//! Experiments add their own files (`loop.csv`, `report.json`).

use super::{AuditRow, ScenarioConfig, SeriesRow};
use crate::error::Result;
use crate::grid::{snapshot, FieldState, Grid};
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub struct RunWriter {
    dir: PathBuf,
    series: csv::Writer<File>,
    audit: BufWriter<File>,
    audit_header: bool,
}

/// Serialize one record; returns the header line when asked for.
fn csv_line<T: Serialize>(x: &T, header: bool) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(Vec::new());
    w.serialize(x)?;
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

pub fn snapshot_path(dir: &Path, step: u64) -> PathBuf {
    dir.join("snapshots").join(format!("snap_{step:07}.bin"))
}

impl RunWriter {
    pub fn create(dir: &Path, cfg: &ScenarioConfig) -> Result<Self> {
        fs::create_dir_all(dir.join("snapshots"))?;
        fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            series: csv::Writer::from_path(dir.join("series.csv"))?,
            audit: BufWriter::new(File::create(dir.join("audit.csv"))?),
            audit_header: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn series(&mut self, row: &SeriesRow) -> Result<()> {
        self.series.serialize(row)?;
        Ok(())
    }

    pub fn audit(&mut self, row: &AuditRow) -> Result<()> {
        let text = csv_line(&row.report, !self.audit_header)?;
        let mut lines = text.lines();
        if !self.audit_header {
            writeln!(self.audit, "step,{}", lines.next().unwrap_or_default())?;
            self.audit_header = true;
        }
        for l in lines {
            writeln!(self.audit, "{},{l}", row.step)?;
        }
        Ok(())
    }

    pub fn snapshot(&mut self, grid: &Grid, s: &FieldState, step: u64) -> Result<()> {
        snapshot::save(&snapshot_path(&self.dir, step), grid, s, step)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.series.flush()?;
        self.audit.flush()?;
        Ok(())
    }
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    fs::write(dir.join(name), serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series(path: &Path) -> Result<Vec<SeriesRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energetics::BalanceReport;

    #[test]
    fn audit_rows_carry_step_column() {
        let line = csv_line(&BalanceReport { t: 0.5, ..Default::default() }, true).unwrap();
        let mut it = line.lines();
        assert!(it.next().unwrap().starts_with("t,dt,kinetic"));
        assert!(it.next().unwrap().starts_with("0.5,0.0,"));
    }
}
