//! Exhaustive checks over parameter panels.

use serde::Serialize;
use usd_core::probs::{transition_probs, u_star_exact};
use usd_core::{bound_comparison, Configuration, LogBase, Prob};

/// A violation of `p̃_+ ≤ 1/2 − ε/2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TildeViolation {
    pub config: String,
    pub epsilon: f64,
    pub p_tilde_plus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TildePanelReport {
    pub points: u64,
    pub violations: u64,
    /// The first few violations.
    pub examples: Vec<TildeViolation>,
}

/// Compositions of `total` into `parts` parts, each part a multiple of
/// `total / steps` except that the first absorbs the rounding.
fn coarse_splits(total: u64, parts: usize, steps: u64, f: &mut impl FnMut(&[u64])) {
    let steps = steps.min(total).max(1);
    let mut units = vec![0u64; parts];
    fn rec(pos: usize, left: u64, units: &mut [u64], emit: &mut dyn FnMut(&[u64])) {
        if pos == units.len() - 1 {
            units[pos] = left;
            emit(units);
            return;
        }
        for a in 0..=left {
            units[pos] = a;
            rec(pos + 1, left - a, units, emit);
        }
    }
    let mut emit = |u: &[u64]| {
        let mut counts: Vec<u64> = u.iter().map(|&a| a * total / steps).collect();
        let assigned: u64 = counts.iter().sum();
        counts[0] += total - assigned;
        f(&counts);
    };
    rec(0, steps, &mut units, &mut emit);
}

/// Checks `p̃_+ ≤ 1/2 − ε/2` in exact arithmetic at every panel point with
/// `u ≥ u* + ε·n`. `epsilons` are `(numerator, denominator)` pairs; the
/// decided agents are split over `k` opinions at `steps` granularity.
pub fn tilde_plus_panel(ns: &[u64], ks: &[usize], epsilons: &[(u64, u64)], steps: u64) -> TildePanelReport {
    let mut report = TildePanelReport {
        points: 0,
        violations: 0,
        examples: Vec::new(),
    };
    for &n in ns {
        for &k in ks {
            for &(en, ed) in epsilons {
                let eps = Prob::new(en as u128, ed as u128);
                let u_min = u_star_exact(n, k) + eps * Prob::from_integer(n as u128);
                let bound = Prob::new(1, 2) - eps / Prob::from_integer(2);
                let first = u_min.ceil().to_integer() as u64;
                // u = n leaves no productive step and p̃_+ undefined
                for u in first..n {
                    coarse_splits(n - u, k, steps, &mut |counts| {
                        let c = Configuration::new(counts.to_vec(), u).expect("valid split");
                        let Some(p) = transition_probs(&c).p_tilde_plus else {
                            return;
                        };
                        report.points += 1;
                        if p > bound {
                            report.violations += 1;
                            if report.examples.len() < 10 {
                                report.examples.push(TildeViolation {
                                    config: c.to_string(),
                                    epsilon: en as f64 / ed as f64,
                                    p_tilde_plus: usd_core::probs::to_f64(&p),
                                });
                            }
                        }
                    });
                }
            }
        }
    }
    report
}

/// 100 configurations straddling `x_max·k = n·log₂ n` with `n = 2^m`,
/// `m ∈ 4..14`, including exact ties whenever `k | n·m`.
pub fn crossover_grid() -> Vec<Configuration> {
    let mut out = Vec::with_capacity(100);
    for m in 4u32..14 {
        let n = 1u64 << m;
        for j in 0..10u64 {
            let k = m as u64 + j;
            let boundary = n * m as u64 / k;
            let x = if j % 2 == 0 { boundary } else { boundary + 1 }.min(n);
            let others = k - 1;
            let each = x.min((n - x) / others);
            let mut counts = vec![x];
            counts.extend(std::iter::repeat_n(each, others as usize));
            let u = n - x - each * others;
            out.push(Configuration::new(counts, u).expect("grid point"));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossoverRow {
    pub config: String,
    pub n: u64,
    pub k: usize,
    pub x_max: u64,
    pub gossip_bound: f64,
    pub population_bound: f64,
    pub crossover: bool,
}

pub fn crossover_rows(grid: &[Configuration]) -> Vec<CrossoverRow> {
    grid.iter()
        .filter_map(|c| {
            let b = bound_comparison(c, LogBase::Two)?;
            Some(CrossoverRow {
                config: c.to_string(),
                n: c.n(),
                k: c.k(),
                x_max: c.x_max(),
                gossip_bound: b.gossip_bound,
                population_bound: b.population_bound,
                crossover: b.crossover,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_cover_the_total() {
        let mut seen = Vec::new();
        coarse_splits(10, 3, 4, &mut |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 15);
        assert!(seen.iter().all(|c| c.iter().sum::<u64>() == 10));
        let mut small = 0;
        coarse_splits(2, 2, 10, &mut |_| small += 1);
        assert_eq!(small, 3);
    }

    #[test]
    fn grid_has_one_hundred_valid_points() {
        let grid = crossover_grid();
        assert_eq!(grid.len(), 100);
        assert!(grid.iter().all(|c| c.max_index() == Some(0)));
    }

    #[test]
    fn small_panel_holds() {
        let r = tilde_plus_panel(&[20, 30], &[2, 3], &[(0, 1), (1, 10)], 6);
        assert!(r.points > 0);
        assert_eq!(r.violations, 0);
    }
}
