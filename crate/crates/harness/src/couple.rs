//! Batches of coupled runs.

use rayon::prelude::*;
use serde::Serialize;
use usd_core::coupling::{run_coupled, CoupledRun};
use usd_core::Configuration;

use crate::error::{HarnessError, Result};
use crate::seed::{trial_rng, trial_seed};

/// `x_1 = leader`, the other `n − u0 − leader` decided agents split as
/// evenly as possible over opinions `2..k`, lower indices first.
pub fn leader_start(n: u64, k: usize, leader: u64, u0: u64) -> Result<Configuration> {
    if k < 2 || leader + u0 > n {
        return Err(HarnessError::Infeasible(format!(
            "leader {leader} and u0 {u0} do not fit n = {n}, k = {k}"
        )));
    }
    let rest = n - leader - u0;
    let others = (k - 1) as u64;
    let mut counts = vec![leader];
    counts.extend((0..others).map(|i| rest / others + u64::from(i < rest % others)));
    Ok(Configuration::new(counts, u0)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct CoupleRecord {
    pub run: u64,
    pub seed: u64,
    #[serde(flatten)]
    pub outcome: CoupledRun,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoupleSummary {
    pub initial: String,
    pub runs: u64,
    pub cap: u64,
    pub violating_runs: u64,
    /// `(run, t)` of the earliest violation in run order.
    pub first_violation: Option<(u64, u64)>,
    /// Runs in which opinion 1 won in both processes.
    pub leader_won_both: u64,
    /// Of those, runs with `t_consensus_k ≤ t_consensus_2`.
    pub k_not_slower: u64,
    pub mean_t_consensus_k: Option<f64>,
    pub mean_t_consensus_two: Option<f64>,
}

pub fn run_coupled_batch(
    c: &Configuration,
    runs: u64,
    cap: u64,
    master_seed: u64,
) -> Result<(CoupleSummary, Vec<CoupleRecord>)> {
    let leader = c.max_index().ok_or(usd_core::Error::NoStrictPlurality)?;
    let records = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = trial_rng(master_seed, run);
            run_coupled(c, cap, &mut rng).map(|outcome| CoupleRecord {
                run,
                seed: trial_seed(master_seed, run),
                outcome,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mean = |f: &dyn Fn(&CoupledRun) -> Option<u64>| {
        let v: Vec<f64> = records.iter().filter_map(|r| f(&r.outcome)).map(|t| t as f64).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let verdicts: Vec<bool> = records.iter().filter_map(|r| r.outcome.k_not_slower(leader)).collect();
    let summary = CoupleSummary {
        initial: c.to_string(),
        runs,
        cap,
        violating_runs: records.iter().filter(|r| !r.outcome.held).count() as u64,
        first_violation: records
            .iter()
            .find_map(|r| r.outcome.first_violation.map(|t| (r.run, t))),
        leader_won_both: verdicts.len() as u64,
        k_not_slower: verdicts.iter().filter(|&&ok| ok).count() as u64,
        mean_t_consensus_k: mean(&|o| o.t_consensus_k),
        mean_t_consensus_two: mean(&|o| o.t_consensus_two),
    };
    Ok((summary, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leader_start_splits_the_rest() {
        let c = leader_start(300, 4, 200, 0).unwrap();
        assert_eq!(c.counts(), [200, 34, 33, 33]);
        assert!(leader_start(10, 3, 9, 2).is_err());
    }

    #[test]
    fn small_batch_holds() {
        let c = leader_start(60, 3, 40, 0).unwrap();
        let (s, records) = run_coupled_batch(&c, 20, 1_000_000, 1).unwrap();
        assert_eq!(records.len(), 20);
        assert_eq!(s.violating_runs, 0);
        assert_eq!(s.k_not_slower, s.leader_won_both);
    }
}
