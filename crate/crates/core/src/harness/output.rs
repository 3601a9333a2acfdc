//! Result files: a long-format CSV plus a JSON echo of the configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DivergedRun, ExperimentConfig, ExperimentResult, ResolvedAlgorithm};
use crate::error::{Error, Result};
use crate::reference::write_file;
use crate::trace::Metric;

pub const CSV_HEADER: [&str; 6] = ["iteration", "comms", "metric", "mean", "std", "run_count"];

/// Everything about a result except the series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEcho {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub algorithm: ResolvedAlgorithm,
    pub lambda2: f64,
    pub smoothness: f64,
    pub strong_convexity: f64,
    pub seeds: Vec<u64>,
    pub diverged: Vec<DivergedRun>,
    pub truncated: bool,
    pub run_count: usize,
}

impl ResultEcho {
    pub fn of(r: &ExperimentResult) -> Self {
        ResultEcho {
            config_hash: r.config.hash(),
            config: r.config.clone(),
            algorithm: r.algorithm,
            lambda2: r.lambda2,
            smoothness: r.smoothness,
            strong_convexity: r.strong_convexity,
            seeds: r.seeds.clone(),
            diverged: r.diverged.clone(),
            truncated: r.truncated,
            run_count: r.run_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WrittenFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
}

/// `<name>-<first 12 hex digits of the config hash>`; the name defaults to
/// the algorithm and is reduced to `[A-Za-z0-9_-]`.
pub fn result_stem(cfg: &ExperimentConfig) -> String {
    let name = cfg.name.clone().unwrap_or_else(|| cfg.algorithm.name().to_string());
    let clean: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '-' })
        .collect();
    format!("{clean}-{}", &cfg.hash()[..12])
}

fn render_csv(r: &ExperimentResult) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    let run_count = r.run_count.to_string();
    let metrics: Vec<Metric> = r.config.metrics.clone();
    for (k, t) in r.iterations.iter().enumerate() {
        let t = t.to_string();
        let comms = r.comms[k].to_string();
        for m in &metrics {
            let Some(s) = r.series(*m) else { continue };
            w.write_record([&t, &comms, m.name(), &s.mean[k].to_string(), &s.std[k].to_string(), &run_count])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`, creating it if needed.
/// Identical results produce byte-identical files.
pub fn write_result(r: &ExperimentResult, dir: &Path) -> Result<WrittenFiles> {
    let stem = result_stem(&r.config);
    let csv = dir.join(format!("{stem}.csv"));
    let json = dir.join(format!("{stem}.json"));
    let body = render_csv(r)?;
    let echo = serde_json::to_string_pretty(&ResultEcho::of(r))?;
    write_file(&csv, &body)?;
    write_file(&json, echo.as_bytes())?;
    Ok(WrittenFiles { csv, json })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub iteration: usize,
    pub comms: f64,
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub run_count: usize,
}

/// Reads a result CSV, rejecting files whose header differs from
/// [`CSV_HEADER`].
pub fn read_result_csv(path: &Path) -> Result<Vec<CsvRow>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.iter().map(String::as_str).ne(CSV_HEADER) {
        let unexpected: Vec<&str> =
            header.iter().map(String::as_str).filter(|h| !CSV_HEADER.contains(h)).collect();
        let missing: Vec<&str> = CSV_HEADER.iter().copied().filter(|c| !header.iter().any(|h| h == c)).collect();
        return Err(Error::Schema(format!(
            "{}: unexpected columns {unexpected:?}, missing columns {missing:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let row: CsvRow = rec?;
        rows.push(row);
    }
    Ok(rows)
}

/// The JSON echo written next to `csv`, if present.
pub fn read_echo(csv: &Path) -> Option<ResultEcho> {
    let text = std::fs::read_to_string(csv.with_extension("json")).ok()?;
    serde_json::from_str(&text).ok()
}

#[cfg(test)]
mod tests {
    use super::super::tests::quad_cfg;
    use super::super::{run_experiment_with, RunOptions};
    use super::*;

    #[test]
    fn written_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_experiment_with(&quad_cfg(2, 1.0, 0.5, 10), &RunOptions { workers: 2 }).unwrap();
        let files = write_result(&r, dir.path()).unwrap();
        let rows = read_result_csv(&files.csv).unwrap();
        assert_eq!(rows.len(), 11 * 5);
        let rel: Vec<f64> = rows.iter().filter(|r| r.metric == Metric::RelError).map(|r| r.mean).collect();
        assert_eq!(rel, r.mean(Metric::RelError));
        assert_eq!(read_echo(&files.csv).unwrap(), ResultEcho::of(&r));
        let first = std::fs::read(&files.csv).unwrap();
        write_result(&r, dir.path()).unwrap();
        assert_eq!(std::fs::read(&files.csv).unwrap(), first);
    }

    #[test]
    fn schema_mismatch_names_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "iteration,comms,metric,avg,std,run_count\n").unwrap();
        let err = read_result_csv(&p).unwrap_err().to_string();
        assert!(err.contains("avg") && err.contains("mean"), "{err}");
    }

    #[test]
    fn unwritable_directory() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let r = run_experiment_with(&quad_cfg(1, 0.0, 1.0, 2), &RunOptions { workers: 1 }).unwrap();
        assert!(matches!(write_result(&r, &blocker.join("sub")), Err(Error::Unwritable { .. })));
    }
}
