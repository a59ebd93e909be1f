//! One trial: a run to consensus or the cap with phase tracking and the
//! undecided-count envelope checks.

use serde::Serialize;
use usd_core::{Configuration, Engine, Observer, PhaseReport, RunOptions, StopReason, ThresholdParams, TraceSample};

use crate::error::Result;
use crate::seed::{trial_rng, trial_seed};
use crate::spec::ExperimentSpec;

/// `(n − x_max)/2 − 8√(n·ln n)`, the lower envelope after the first phase.
pub fn lower_envelope(c: &Configuration) -> f64 {
    let n = c.n() as f64;
    let slack = if n > 1.0 { 8.0 * (n * n.ln()).sqrt() } else { 0.0 };
    (n - c.x_max() as f64) / 2.0 - slack
}

/// Whether `u < n/2`.
pub fn below_half(c: &Configuration) -> bool {
    2 * c.undecided() < c.n()
}

/// Tracks phases, extremes of `u` and envelope violations along a run.
#[derive(Clone, Debug)]
pub struct TrialObserver {
    pub report: PhaseReport,
    audit: bool,
    pub max_u: u64,
    /// Minimum of `u` over `[T1, T5]`, over the observed times.
    pub min_u_post_t1: Option<u64>,
    /// Observed times with `u ≥ n/2`.
    pub upper_violations: u64,
    /// Observed times in `[T1, T5]` below the lower envelope.
    pub lower_violations: u64,
    params: ThresholdParams,
    trace: Option<Vec<TraceSample>>,
}

impl TrialObserver {
    pub fn new(initial: &Configuration, params: ThresholdParams, audit: bool, trace: bool) -> Self {
        let mut obs = TrialObserver {
            report: PhaseReport::new(initial, params),
            audit,
            max_u: initial.undecided(),
            min_u_post_t1: None,
            upper_violations: 0,
            lower_violations: 0,
            params,
            trace: trace.then(Vec::new),
        };
        obs.track_u(initial);
        obs.check(initial);
        obs
    }

    pub fn take_trace(&mut self) -> Vec<TraceSample> {
        self.trace.take().unwrap_or_default()
    }

    fn in_lower_window(&self) -> bool {
        self.report.t(1).is_some()
    }

    fn track_u(&mut self, c: &Configuration) {
        let u = c.undecided();
        self.max_u = self.max_u.max(u);
        if self.in_lower_window() {
            self.min_u_post_t1 = Some(self.min_u_post_t1.map_or(u, |m| m.min(u)));
        }
    }

    fn check(&mut self, c: &Configuration) {
        if !below_half(c) {
            self.upper_violations += 1;
        }
        if self.in_lower_window() && (c.undecided() as f64) < lower_envelope(c) {
            self.lower_violations += 1;
        }
    }

    /// Once consensus is recorded the window `[T1, T5]` is closed.
    fn closed(&self) -> bool {
        self.report.is_frozen()
    }
}

impl Observer for TrialObserver {
    fn on_change(&mut self, t: u64, c: &Configuration) {
        if self.closed() {
            return;
        }
        self.report.update(t, c).expect("engine time is monotone");
        // `u` only moves on productive steps, so its extremes are exact here
        self.track_u(c);
        if self.audit {
            self.check(c);
        }
    }

    fn on_sample(&mut self, t: u64, c: &Configuration) {
        if let Some(trace) = &mut self.trace {
            trace.push(TraceSample::new(t, c, &self.params));
        }
        if !self.audit && !self.closed() {
            self.check(c);
        }
    }
}

/// Per-trial outcome. Opinion indices are 0-based here and 1-based in
/// serialized rows.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub seed: u64,
    pub n: u64,
    pub k: usize,
    pub init_kind: String,
    pub beta: Option<u64>,
    pub ratio: Option<f64>,
    pub u0: u64,
    pub total_interactions: u64,
    pub hitting_times: [Option<u64>; 5],
    pub winner: Option<usize>,
    pub winner_was_initial_plurality: bool,
    pub plurality_at_t2: Option<usize>,
    pub max_u: u64,
    pub min_u_post_t1: Option<u64>,
    pub upper_violations: u64,
    pub lower_violations: u64,
    pub stop_reason: StopReason,
    /// The final configuration still holds exactly `n` agents.
    pub conserved: bool,
}

impl TrialRecord {
    pub fn envelope_violations(&self) -> u64 {
        self.upper_violations + self.lower_violations
    }

    pub fn reached_consensus(&self) -> bool {
        self.winner.is_some()
    }

    /// The eventual winner was the plurality opinion at `T2`.
    pub fn winner_significant_at_t2(&self) -> bool {
        self.winner.is_some() && self.winner == self.plurality_at_t2
    }
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub report: PhaseReport,
    pub final_config: Configuration,
    pub trace: Vec<TraceSample>,
}

/// Runs trial `trial_id` of `spec` from `initial`.
pub fn run_trial(spec: &ExperimentSpec, initial: &Configuration, trial_id: u64, trace: bool) -> Result<TrialOutcome> {
    let params = spec.threshold_params()?;
    let mut rng = trial_rng(spec.master_seed, trial_id);
    let mut engine = Engine::new(initial.clone())?;
    let mut obs = TrialObserver::new(initial, params, spec.audit, trace);
    let opts = RunOptions::new(spec.mode(), spec.cap()).sample_every(spec.sample_every());
    let result = engine.run_until(&opts, |_, _| false, &mut rng, &mut obs);
    let report = obs.report.clone();
    let record = TrialRecord {
        trial_id,
        seed: trial_seed(spec.master_seed, trial_id),
        n: spec.n,
        k: spec.k,
        init_kind: spec.init.name().to_owned(),
        beta: spec.beta(),
        ratio: spec.ratio(),
        u0: spec.u0,
        total_interactions: result.interactions,
        hitting_times: report.hitting_times,
        winner: report.winner,
        winner_was_initial_plurality: report.winner_was_initial_plurality,
        plurality_at_t2: report.plurality_at_t2,
        max_u: obs.max_u,
        min_u_post_t1: obs.min_u_post_t1,
        upper_violations: obs.upper_violations,
        lower_violations: obs.lower_violations,
        stop_reason: result.stop_reason,
        conserved: result.final_config.counts().iter().sum::<u64>() + result.final_config.undecided() == spec.n,
    };
    Ok(TrialOutcome {
        record,
        report,
        final_config: result.final_config,
        trace: obs.take_trace(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::InitKind;

    #[test]
    fn lower_envelope_value() {
        let c = Configuration::new(vec![400, 100], 500).unwrap();
        let expected = 300.0 - 8.0 * (1000.0f64 * 1000.0f64.ln()).sqrt();
        assert!((lower_envelope(&c) - expected).abs() < 1e-12);
    }

    #[test]
    fn trial_reaches_consensus_and_reports() {
        let mut spec = ExperimentSpec::new(200, 3);
        spec.master_seed = 5;
        spec.audit = true;
        let initial = crate::spec::make_initial(&spec).unwrap();
        let out = run_trial(&spec, &initial, 0, true).unwrap();
        let r = &out.record;
        assert_eq!(r.stop_reason, StopReason::Consensus);
        assert!(r.conserved);
        assert_eq!(r.hitting_times[4], Some(r.total_interactions));
        assert!(r.winner.is_some());
        assert!(r.max_u < 100);
        assert!(!out.trace.is_empty());
        assert!(out.trace.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn trial_is_reproducible() {
        let mut spec = ExperimentSpec::new(300, 4);
        spec.init = InitKind::Additive { beta: Some(30) };
        spec.master_seed = 77;
        let initial = crate::spec::make_initial(&spec).unwrap();
        let a = run_trial(&spec, &initial, 3, false).unwrap().record;
        let b = run_trial(&spec, &initial, 3, false).unwrap().record;
        assert_eq!(a, b);
        let c = run_trial(&spec, &initial, 4, false).unwrap().record;
        assert_ne!(a.seed, c.seed);
    }
}
