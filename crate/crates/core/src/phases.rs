//! Online detection of the five phase boundaries.
//!
//! | phase | ends when                                   |
//! |-------|---------------------------------------------|
//! | 1     | `u ≥ (n − x_max)/2`                         |
//! | 2     | exactly one significant opinion remains, or consensus |
//! | 3     | `x_max ≥ 2·x_i` for every other opinion `i` |
//! | 4     | `x_max ≥ 2n/3`                              |
//! | 5     | `x_max = n`                                 |
//!
//! Each hitting time is the first time at or after the previous one at
//! which the condition holds, so a phase may end at the same instant as
//! its predecessor.

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::metrics::{bias_summary, potential_z, significant_count, ThresholdParams};

pub const PHASES: usize = 5;

/// Evaluates the five end conditions on `c`.
pub fn phase_predicates(c: &Configuration, params: &ThresholdParams) -> [bool; PHASES] {
    let mut out = [false; PHASES];
    for (p, slot) in out.iter_mut().enumerate() {
        *slot = phase_ends(p, c, params);
    }
    out
}

fn phase_ends(phase: usize, c: &Configuration, params: &ThresholdParams) -> bool {
    let n = c.n();
    let x_max = c.x_max();
    match phase {
        0 => 2 * c.undecided() >= n - x_max,
        // consensus ends the phase even when the window exceeds n
        1 => x_max == n || (x_max - c.second_max()) as f64 >= params.significance_window(n),
        2 => x_max >= 2 * c.second_max(),
        3 => 3 * x_max >= 2 * n,
        4 => n > 0 && x_max == n,
        _ => unreachable!(),
    }
}

/// Hitting times of the phase boundaries for one run.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PhaseReport {
    /// `T1..T5`.
    pub hitting_times: [Option<u64>; PHASES],
    /// Consensus opinion once `T5` is set.
    pub winner: Option<usize>,
    pub winner_was_initial_plurality: bool,
    /// Lowest-index plurality opinion of the initial configuration.
    pub initial_plurality: Option<usize>,
    /// Plurality opinion at `T2`, the opinion later phases follow.
    pub plurality_at_t2: Option<usize>,
    #[cfg_attr(feature = "serde", serde(skip))]
    params: ThresholdParams,
    #[cfg_attr(feature = "serde", serde(skip))]
    last_t: u64,
}

impl PhaseReport {
    /// Starts tracking at `t = 0` from `initial`.
    pub fn new(initial: &Configuration, params: ThresholdParams) -> Self {
        let mut report = PhaseReport {
            hitting_times: [None; PHASES],
            winner: None,
            winner_was_initial_plurality: false,
            initial_plurality: initial.max_index(),
            plurality_at_t2: None,
            params,
            last_t: 0,
        };
        report.advance(0, initial);
        report
    }

    pub fn params(&self) -> &ThresholdParams {
        &self.params
    }

    /// Hitting time of phase `phase` (1-based, as in `T1..T5`).
    pub fn t(&self, phase: usize) -> Option<u64> {
        self.hitting_times[phase - 1]
    }

    pub fn end_conditions_met(&self) -> [bool; PHASES] {
        self.hitting_times.map(|t| t.is_some())
    }

    /// Set once consensus has been recorded; later samples are ignored.
    pub fn is_frozen(&self) -> bool {
        self.hitting_times[PHASES - 1].is_some()
    }

    /// Index of the next phase whose end has not been observed.
    pub fn current_phase(&self) -> usize {
        self.hitting_times.iter().position(Option::is_none).unwrap_or(PHASES)
    }

    /// Feeds the configuration at time `t`. Times must not decrease.
    pub fn update(&mut self, t: u64, c: &Configuration) -> Result<()> {
        if t < self.last_t {
            return Err(Error::OutOfOrder { t, last: self.last_t });
        }
        self.last_t = t;
        if !self.is_frozen() {
            self.advance(t, c);
        }
        Ok(())
    }

    fn advance(&mut self, t: u64, c: &Configuration) {
        while let Some(p) = self.hitting_times.iter().position(Option::is_none) {
            if !phase_ends(p, c, &self.params) {
                break;
            }
            self.hitting_times[p] = Some(t);
            match p {
                1 => self.plurality_at_t2 = c.max_index(),
                4 => {
                    self.winner = c.consensus_opinion();
                    self.winner_was_initial_plurality = self.winner.is_some() && self.winner == self.initial_plurality;
                }
                _ => {}
            }
        }
    }
}

/// Metrics recorded at the trace cadence.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TraceSample {
    pub t: u64,
    pub u: u64,
    pub x_max: u64,
    pub max_index: Option<usize>,
    /// `Z_1 = n − 2u − x_max`.
    pub z_alpha: f64,
    pub additive_bias: u64,
    pub multiplicative_bias: f64,
    pub significant_count: usize,
}

impl TraceSample {
    pub fn new(t: u64, c: &Configuration, params: &ThresholdParams) -> Self {
        let bias = bias_summary(c);
        TraceSample {
            t,
            u: c.undecided(),
            x_max: c.x_max(),
            max_index: c.max_index(),
            z_alpha: potential_z(c, 1.0),
            additive_bias: bias.map_or(0, |b| b.additive_bias),
            multiplicative_bias: bias.map_or(f64::NAN, |b| b.multiplicative_bias),
            significant_count: significant_count(c, params),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(counts: &[u64], u: u64) -> Configuration {
        Configuration::new(counts.to_vec(), u).unwrap()
    }

    #[test]
    fn first_phase_boundary_is_inclusive() {
        let p = ThresholdParams::default();
        // n = 11, x_max = 4: (n − x_max)/2 = 3.5
        assert!(phase_predicates(&cfg(&[4, 3], 4), &p)[0]);
        assert!(!phase_predicates(&cfg(&[4, 4], 3), &p)[0]);
        // n = 10, x_max = 4: boundary exactly at 3
        assert!(phase_predicates(&cfg(&[4, 3], 3), &p)[0]);
        assert!(!phase_predicates(&cfg(&[4, 4], 2), &p)[0]);
    }

    #[test]
    fn consensus_satisfies_everything() {
        let p = ThresholdParams::default();
        assert_eq!(phase_predicates(&cfg(&[0, 12, 0], 0), &p), [true; PHASES]);
    }

    #[test]
    fn second_phase_needs_a_single_significant_opinion() {
        let p = ThresholdParams::default();
        // a = 100, window for n = 900 is 30·log2(900) ≈ 294 > a
        let c = cfg(&[200, 100, 100], 500);
        assert!(p.significance_window(c.n()) > 100.0);
        let ends = phase_predicates(&c, &p);
        assert!(ends[0]);
        assert!(!ends[1]);
        assert!(ends[2]);
        assert_eq!(significant_count(&c, &p), 3);
    }

    #[test]
    fn large_bias_sets_early_phases_at_zero() {
        let c = cfg(&[70, 5, 5], 20);
        let r = PhaseReport::new(&c, ThresholdParams::with_alpha(0.5).unwrap());
        assert_eq!(r.hitting_times, [Some(0), Some(0), Some(0), Some(0), None]);
        assert_eq!(r.plurality_at_t2, Some(0));
        assert_eq!(r.current_phase(), 4);
    }

    #[test]
    fn hitting_times_follow_phase_order() {
        let p = ThresholdParams::default();
        // phase 4's condition holds but phase 1's does not: nothing recorded
        let mut r = PhaseReport::new(&cfg(&[80, 20], 0), p);
        assert_eq!(r.hitting_times, [None; PHASES]);
        r.update(5, &cfg(&[80, 0], 20)).unwrap();
        assert_eq!(r.hitting_times, [Some(5), Some(5), Some(5), Some(5), None]);
        r.update(9, &cfg(&[100, 0], 0)).unwrap();
        assert_eq!(r.t(5), Some(9));
        assert_eq!(r.winner, Some(0));
        assert!(r.winner_was_initial_plurality);
        assert!(r.is_frozen());
        // frozen: later samples change nothing
        r.update(12, &cfg(&[50, 0], 50)).unwrap();
        assert_eq!(r.t(5), Some(9));
    }

    #[test]
    fn out_of_order_is_rejected() {
        let mut r = PhaseReport::new(&cfg(&[5, 5], 0), ThresholdParams::default());
        r.update(10, &cfg(&[5, 4], 1)).unwrap();
        assert_eq!(r.update(3, &cfg(&[5, 4], 1)), Err(Error::OutOfOrder { t: 3, last: 10 }));
        assert_eq!(r.t(5), None);
    }

    #[test]
    fn upset_winner_is_flagged() {
        let mut r = PhaseReport::new(&cfg(&[6, 4], 0), ThresholdParams::default());
        r.update(100, &cfg(&[0, 10], 0)).unwrap();
        assert_eq!(r.winner, Some(1));
        assert!(!r.winner_was_initial_plurality);
    }

    #[test]
    fn trace_sample_matches_configuration() {
        let c = cfg(&[5, 3, 1], 1);
        let s = TraceSample::new(42, &c, &ThresholdParams::default());
        assert_eq!((s.t, s.u, s.x_max, s.max_index), (42, 1, 5, Some(0)));
        assert_eq!(s.z_alpha, 10.0 - 2.0 - 5.0);
        assert_eq!(s.additive_bias, 2);
    }
}
