//! Grids of experiments with one aggregate row per cell, resumable through
//! a manifest of completed cells.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fit::ScalingPoint;
use crate::runner::run_trials;
use crate::spec::{ExperimentSpec, InitKind};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub ns: Vec<u64>,
    pub ks: Vec<usize>,
    pub inits: Vec<InitKind>,
}

impl SweepGrid {
    /// Cells in `n`-major, then `k`, then init order.
    pub fn cells(&self, base: &ExperimentSpec) -> Vec<ExperimentSpec> {
        let mut out = Vec::new();
        for &n in &self.ns {
            for &k in &self.ks {
                for init in &self.inits {
                    out.push(ExperimentSpec {
                        n,
                        k,
                        init: init.clone(),
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub k: usize,
    pub init_kind: String,
    pub beta: Option<u64>,
    pub ratio: Option<f64>,
    pub trials: u64,
    /// `"ok"` or `"error"`.
    pub status: String,
    pub error: Option<String>,
    pub consensus_trials: Option<usize>,
    pub mean_interactions: Option<f64>,
    pub median_interactions: Option<f64>,
    pub q99_interactions: Option<f64>,
    pub max_interactions: Option<f64>,
    pub plurality_win_rate: Option<f64>,
    pub envelope_violation_trials: Option<usize>,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn scaling_point(&self) -> Option<ScalingPoint> {
        Some(ScalingPoint {
            n: self.n,
            k: self.k,
            mean_interactions: self.mean_interactions?,
        })
    }
}

fn cell_key(spec: &ExperimentSpec) -> String {
    format!(
        "n={};k={};init={}",
        spec.n,
        spec.k,
        serde_json::to_string(&spec.init).expect("init serializes")
    )
}

fn run_cell(spec: &ExperimentSpec) -> SweepRow {
    let mut row = SweepRow {
        n: spec.n,
        k: spec.k,
        init_kind: spec.init.name().to_owned(),
        beta: spec.beta(),
        ratio: spec.ratio(),
        trials: spec.trials,
        status: "ok".into(),
        error: None,
        consensus_trials: None,
        mean_interactions: None,
        median_interactions: None,
        q99_interactions: None,
        max_interactions: None,
        plurality_win_rate: None,
        envelope_violation_trials: None,
    };
    match run_trials(spec) {
        Ok(batch) => {
            let s = &batch.stats;
            row.consensus_trials = Some(s.consensus_trials);
            if let Some(t) = &s.total_interactions {
                row.mean_interactions = Some(t.mean);
                row.median_interactions = Some(t.median);
                row.q99_interactions = Some(t.q99);
                row.max_interactions = Some(t.max);
            }
            row.plurality_win_rate = Some(s.plurality_win_rate);
            row.envelope_violation_trials = Some(s.upper_violation_trials.max(s.lower_violation_trials));
        }
        Err(e) => {
            row.status = "error".into();
            row.error = Some(e.to_string());
        }
    }
    row
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    key: String,
    row: SweepRow,
}

fn load_manifest(path: &Path) -> Result<BTreeMap<String, SweepRow>> {
    let mut done = BTreeMap::new();
    if !path.exists() {
        return Ok(done);
    }
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        // a torn last line from an interrupted run is recomputed
        if let Ok(entry) = serde_json::from_str::<ManifestEntry>(&line) {
            done.insert(entry.key, entry.row);
        }
    }
    Ok(done)
}

/// Runs every cell of `grid`. Failed cells yield error rows and the sweep
/// continues. With a manifest, completed cells are appended to it and
/// reused on the next call instead of being rerun.
pub fn sweep(base: &ExperimentSpec, grid: &SweepGrid, manifest: Option<&Path>) -> Result<Vec<SweepRow>> {
    let mut done = match manifest {
        Some(p) => load_manifest(p)?,
        None => BTreeMap::new(),
    };
    let mut log = match manifest {
        Some(p) => {
            let torn = std::fs::read(p).is_ok_and(|bytes| bytes.last().is_some_and(|&b| b != b'\n'));
            let mut f = OpenOptions::new().create(true).append(true).open(p)?;
            if torn {
                writeln!(f)?;
            }
            Some(f)
        }
        None => None,
    };
    let mut rows = Vec::new();
    for spec in grid.cells(base) {
        let key = cell_key(&spec);
        if let Some(row) = done.remove(&key) {
            rows.push(row);
            continue;
        }
        let row = run_cell(&spec);
        if let (Some(f), true) = (&mut log, row.is_ok()) {
            let entry = ManifestEntry { key, row: row.clone() };
            writeln!(f, "{}", serde_json::to_string(&entry)?)?;
            f.flush()?;
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_rows_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
