//! Monte-Carlo harness for the undecided state dynamics: initial
//! configurations for the unbiased and biased regimes, seeded parallel
//! trials with phase and envelope tracking, aggregation, scaling fits,
//! sweeps, coupled runs and the CSV/JSON formats behind the `usd` CLI.

pub mod couple;
pub mod error;
pub mod fit;
pub mod output;
pub mod panels;
pub mod runner;
pub mod seed;
pub mod spec;
pub mod stats;
pub mod sweep;
pub mod trial;

pub use error::{HarnessError, Result};
pub use runner::{run_trials, run_trials_with_threads, TrialBatch};
pub use spec::{make_initial, ExperimentSpec, InitKind};
pub use trial::{run_trial, TrialOutcome, TrialRecord};
