//! Side-by-side view of several sweeps over the same data and k range.
//!
//! Produces a wide grid (one row per k, one column per setting, cells are
//! mean guide scores), the same numbers in long format for plotting tools,
//! and per-setting wall-clock totals from the timing sidecars.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::subset::NeighborhoodKind;
use crate::sweep::{read_results_csv, read_timing_csv, sibling, Algorithm, ResultsTable, Schedule};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongRow {
    pub k: usize,
    pub setting: String,
    pub mean_guide: f64,
    pub stderr_guide: f64,
    pub mean_test_ndcg10: f64,
    pub mean_test_map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WallTotal {
    pub setting: String,
    /// Empty when the sweep's timing sidecar is missing.
    pub total_wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub ks: Vec<usize>,
    pub labels: Vec<String>,
    /// `grid[i][j]`: mean guide score at `ks[i]` for `labels[j]`.
    pub grid: Vec<Vec<f64>>,
    pub long: Vec<LongRow>,
    pub wall: Vec<WallTotal>,
}

/// One sweep to compare: its results and, if available, its timing.
pub struct SweepResult {
    pub table: ResultsTable,
    pub total_wall_ms: Option<f64>,
}

impl SweepResult {
    /// Reads `path` and its `.timing.csv` sidecar when present.
    pub fn load(path: &Path) -> Result<Self> {
        let table = read_results_csv(path)?;
        let timing = sibling(path, "timing.csv");
        let total_wall_ms = if timing.is_file() {
            Some(
                read_timing_csv(&timing)?
                    .iter()
                    .map(|t| t.total_wall_ms)
                    .sum(),
            )
        } else {
            None
        };
        Ok(SweepResult {
            table,
            total_wall_ms,
        })
    }

    fn label(&self) -> Result<String> {
        let first = self
            .table
            .rows
            .first()
            .ok_or_else(|| Error::EmptyData("results file has no rows".into()))?;
        let nb: NeighborhoodKind = first.neighborhood.parse()?;
        Ok(match first.algorithm {
            Algorithm::Sa => format!("{}{}", nb.tag(), first.scheme.parse::<Schedule>()?.tag()),
            Algorithm::Lbs => format!("lbs-{}", nb.tag()),
        })
    }
}

pub fn compare(sweeps: &[SweepResult]) -> Result<Comparison> {
    if sweeps.len() < 2 {
        return Err(Error::Config(format!(
            "comparison needs at least two sweeps, got {}",
            sweeps.len()
        )));
    }
    let hashes: BTreeSet<u64> = sweeps.iter().filter_map(|s| s.table.dataset_hash).collect();
    if hashes.len() > 1 {
        return Err(Error::Config(
            "sweeps were run on different datasets".into(),
        ));
    }
    let ks: Vec<usize> = sweeps[0].table.rows.iter().map(|r| r.k).collect();
    for s in &sweeps[1..] {
        let other: Vec<usize> = s.table.rows.iter().map(|r| r.k).collect();
        if other != ks {
            return Err(Error::Config(format!(
                "mismatched k ranges: {ks:?} vs {other:?}"
            )));
        }
    }

    let mut labels: Vec<String> = Vec::with_capacity(sweeps.len());
    for s in sweeps {
        let base = s.label()?;
        let mut label = base.clone();
        let mut i = 2;
        while labels.contains(&label) {
            label = format!("{base}#{i}");
            i += 1;
        }
        labels.push(label);
    }

    let grid = (0..ks.len())
        .map(|i| sweeps.iter().map(|s| s.table.rows[i].mean_guide).collect())
        .collect();
    let mut long = Vec::with_capacity(ks.len() * sweeps.len());
    for (s, label) in sweeps.iter().zip(&labels) {
        for r in &s.table.rows {
            long.push(LongRow {
                k: r.k,
                setting: label.clone(),
                mean_guide: r.mean_guide,
                stderr_guide: r.stderr_guide,
                mean_test_ndcg10: r.mean_test_ndcg10,
                mean_test_map: r.mean_test_map,
            });
        }
    }
    let wall = sweeps
        .iter()
        .zip(&labels)
        .map(|(s, label)| WallTotal {
            setting: label.clone(),
            total_wall_ms: s.total_wall_ms,
        })
        .collect();
    Ok(Comparison {
        ks,
        labels,
        grid,
        long,
        wall,
    })
}

pub fn compare_files(paths: &[PathBuf]) -> Result<Comparison> {
    let sweeps = paths
        .iter()
        .map(|p| SweepResult::load(p))
        .collect::<Result<Vec<_>>>()?;
    compare(&sweeps)
}

/// Writes `out` (wide grid), `<stem>.long.csv` and `<stem>.timing.csv`;
/// returns the three paths.
pub fn write_comparison(out: &Path, c: &Comparison) -> Result<[PathBuf; 3]> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let writer = |path: &Path| -> Result<csv::Writer<std::fs::File>> {
        std::fs::File::create(path)
            .map(csv::Writer::from_writer)
            .map_err(|e| Error::io(path, e))
    };

    let mut w = writer(out)?;
    let mut header = vec!["k".to_string()];
    header.extend(c.labels.iter().cloned());
    w.write_record(&header)?;
    for (k, row) in c.ks.iter().zip(&c.grid) {
        let mut rec = vec![k.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;

    let long_path = sibling(out, "long.csv");
    let mut w = writer(&long_path)?;
    for row in &c.long {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(&long_path, e))?;

    let wall_path = sibling(out, "timing.csv");
    let mut w = writer(&wall_path)?;
    for row in &c.wall {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(&wall_path, e))?;
    Ok([out.to_path_buf(), long_path, wall_path])
}
