//! Independent trials in parallel with deterministic, ordered results.

use rayon::prelude::*;
use serde::Serialize;
use usd_core::Configuration;

use crate::error::Result;
use crate::spec::{make_initial, ExperimentSpec};
use crate::stats::AggregateStats;
use crate::trial::{run_trial, TrialRecord};

#[derive(Clone, Debug, Serialize)]
pub struct TrialBatch {
    pub spec: ExperimentSpec,
    pub initial: Configuration,
    pub warnings: Vec<String>,
    pub records: Vec<TrialRecord>,
    pub stats: AggregateStats,
}

/// Runs every trial of `spec` on the current rayon pool. Records are in
/// trial order and depend only on the spec, never on the worker count.
pub fn run_trials(spec: &ExperimentSpec) -> Result<TrialBatch> {
    let initial = make_initial(spec)?;
    spec.threshold_params()?;
    let records = (0..spec.trials)
        .into_par_iter()
        .map(|id| run_trial(spec, &initial, id, false).map(|o| o.record))
        .collect::<Result<Vec<_>>>()?;
    let stats = AggregateStats::from_records(&records);
    Ok(TrialBatch {
        spec: spec.clone(),
        initial,
        warnings: spec.warnings(),
        records,
        stats,
    })
}

/// [`run_trials`] on a dedicated pool of `threads` workers.
pub fn run_trials_with_threads(spec: &ExperimentSpec, threads: usize) -> Result<TrialBatch> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| run_trials(spec))
}
