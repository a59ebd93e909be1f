//! File formats: the per-trial CSV and the JSON aggregate.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::runner::TrialBatch;
use crate::spec::ExperimentSpec;
use crate::stats::AggregateStats;
use crate::trial::TrialRecord;

pub const CSV_HEADER: &str = "trial_id,seed,n,k,init_kind,beta,ratio,u0,total_interactions,t1,t2,t3,t4,t5,winner,winner_was_initial_plurality,max_u,min_u_post_t1,envelope_violations";

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const BUILD_ID: &str = env!("USD_BUILD_ID");

/// One CSV line. Opinions are 1-based; absent values are empty fields.
#[derive(Serialize)]
struct CsvRow<'a> {
    trial_id: u64,
    seed: u64,
    n: u64,
    k: usize,
    init_kind: &'a str,
    beta: Option<u64>,
    ratio: Option<f64>,
    u0: u64,
    total_interactions: u64,
    t1: Option<u64>,
    t2: Option<u64>,
    t3: Option<u64>,
    t4: Option<u64>,
    t5: Option<u64>,
    winner: Option<usize>,
    winner_was_initial_plurality: bool,
    max_u: u64,
    min_u_post_t1: Option<u64>,
    envelope_violations: u64,
}

impl<'a> From<&'a TrialRecord> for CsvRow<'a> {
    fn from(r: &'a TrialRecord) -> Self {
        let [t1, t2, t3, t4, t5] = r.hitting_times;
        CsvRow {
            trial_id: r.trial_id,
            seed: r.seed,
            n: r.n,
            k: r.k,
            init_kind: &r.init_kind,
            beta: r.beta,
            ratio: r.ratio,
            u0: r.u0,
            total_interactions: r.total_interactions,
            t1,
            t2,
            t3,
            t4,
            t5,
            winner: r.winner.map(|w| w + 1),
            winner_was_initial_plurality: r.winner_was_initial_plurality,
            max_u: r.max_u,
            min_u_post_t1: r.min_u_post_t1,
            envelope_violations: r.envelope_violations(),
        }
    }
}

/// Writes the header and one line per record, LF-terminated.
pub fn write_trials_csv<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        w.serialize(CsvRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
pub struct AggregateDocument<'a> {
    pub spec: &'a ExperimentSpec,
    pub initial: String,
    pub warnings: &'a [String],
    pub stats: &'a AggregateStats,
    pub version: &'static str,
    pub build: &'static str,
}

impl<'a> AggregateDocument<'a> {
    pub fn of(batch: &'a TrialBatch) -> Self {
        AggregateDocument {
            spec: &batch.spec,
            initial: batch.initial.to_string(),
            warnings: &batch.warnings,
            stats: &batch.stats,
            version: VERSION,
            build: BUILD_ID,
        }
    }
}

pub fn write_aggregate_json<W: Write>(mut out: W, batch: &TrialBatch) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &AggregateDocument::of(batch))?;
    writeln!(out)?;
    Ok(())
}
