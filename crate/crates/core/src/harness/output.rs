use std::path::{Path, PathBuf};

use super::experiment::{EpisodeRow, RunReport};
use crate::error::Result;

pub const EPISODES_FILE: &str = "episodes.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SERIES_FILE: &str = "series.json";

pub fn write_rows(path: &Path, rows: &[EpisodeRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<EpisodeRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| Ok(row?)).collect()
}

pub fn parse_rows(text: &str) -> Result<Vec<EpisodeRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| Ok(row?)).collect()
}

/// Writes the per-episode CSV, summary and series into `dir`; returns their paths.
pub fn write_report(dir: &Path, report: &RunReport) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let episodes = dir.join(EPISODES_FILE);
    write_rows(&episodes, &report.rows)?;
    let summary = dir.join(SUMMARY_FILE);
    std::fs::write(&summary, serde_json::to_string_pretty(report)?)?;
    let series = dir.join(SERIES_FILE);
    std::fs::write(&series, serde_json::to_string(&report.series)?)?;
    Ok(vec![episodes, summary, series])
}
