//! Scalar summaries of a configuration: potential, biases, opinion
//! classification and the monochromatic distance.

use alloc::vec::Vec;

use crate::config::Configuration;
use crate::error::{Error, Result};

/// Base of the logarithm in a threshold. The constant `α` absorbs the
/// difference, so both are offered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum LogBase {
    Natural,
    #[default]
    Two,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => libm::log(x),
            LogBase::Two => libm::log2(x),
        }
    }
}

/// `Z_α = n − 2u − α·x_max`. `α = 1` drives the first phase, `α = 7/8`
/// the fourth.
pub fn potential_z(c: &Configuration, alpha: f64) -> f64 {
    c.n() as f64 - 2.0 * c.undecided() as f64 - alpha * c.x_max() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BiasSummary {
    /// Lowest index with maximal support.
    pub max_index: usize,
    pub max_support: u64,
    /// `x_max` minus the largest other support.
    pub additive_bias: u64,
    /// `x_max` over the largest other support; infinite when that is zero.
    pub multiplicative_bias: f64,
}

/// `None` when every agent is undecided.
pub fn bias_summary(c: &Configuration) -> Option<BiasSummary> {
    let max_index = c.max_index()?;
    let max_support = c.counts()[max_index];
    let second = c.second_max();
    let multiplicative_bias = if second == 0 {
        f64::INFINITY
    } else {
        max_support as f64 / second as f64
    };
    Some(BiasSummary {
        max_index,
        max_support,
        additive_bias: max_support - second,
        multiplicative_bias,
    })
}

/// Constants from which classification thresholds are derived.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdParams {
    /// Significance constant `α`.
    pub alpha: f64,
    /// Base of `log n` in the significance window `α√n·log n`.
    pub significance_log: LogBase,
    /// Base of `log n` in the small cut `20√(n·log n)`.
    pub small_log: LogBase,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        ThresholdParams {
            alpha: 1.0,
            significance_log: LogBase::Two,
            small_log: LogBase::Two,
        }
    }
}

impl ThresholdParams {
    pub fn with_alpha(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidAlpha);
        }
        Ok(ThresholdParams {
            alpha,
            ..Default::default()
        })
    }

    /// Width of the significance window, `α√n·log n`.
    pub fn significance_window(&self, n: u64) -> f64 {
        let n = n as f64;
        if n <= 1.0 {
            return 0.0;
        }
        self.alpha * libm::sqrt(n) * self.significance_log.log(n)
    }

    /// `20√(n·log n)`.
    pub fn small_cut(&self, n: u64) -> f64 {
        let n = n as f64;
        if n <= 1.0 {
            return 0.0;
        }
        20.0 * libm::sqrt(n * self.small_log.log(n))
    }

    pub fn thresholds(&self, c: &Configuration) -> ClassificationThresholds {
        let window = self.significance_window(c.n());
        let x_max = c.x_max() as f64;
        ClassificationThresholds {
            alpha: self.alpha,
            significant_cut: x_max - window,
            important_cut: x_max - 4.0 * window,
            small_cut: self.small_cut(c.n()),
        }
    }
}

/// Cuts for one configuration. `important_cut ≤ significant_cut ≤ x_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ClassificationThresholds {
    pub alpha: f64,
    /// Opinions strictly above this are significant.
    pub significant_cut: f64,
    /// Opinions strictly above this are important.
    pub important_cut: f64,
    /// Opinions at or below this are small.
    pub small_cut: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OpinionClass {
    pub significant: bool,
    pub important: bool,
    pub small: bool,
}

pub fn classify_opinions(c: &Configuration, th: &ClassificationThresholds) -> Vec<OpinionClass> {
    c.counts()
        .iter()
        .map(|&x| {
            let x = x as f64;
            OpinionClass {
                significant: x > th.significant_cut,
                important: x > th.important_cut,
                small: x <= th.small_cut,
            }
        })
        .collect()
}

/// Number of significant opinions.
pub fn significant_count(c: &Configuration, params: &ThresholdParams) -> usize {
    let cut = params.thresholds(c).significant_cut;
    c.counts().iter().filter(|&&x| x as f64 > cut).count()
}

/// `md(x) = Σ (x_i/x_max)²`, in `[1, k]`. `None` when `x_max = 0`.
pub fn monochromatic_distance(c: &Configuration) -> Option<f64> {
    let x_max = c.x_max();
    if x_max == 0 {
        return None;
    }
    let x_max = x_max as f64;
    Some(
        c.counts()
            .iter()
            .map(|&x| (x as f64 / x_max) * (x as f64 / x_max))
            .sum(),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BoundVerdict {
    /// The gossip-model bound `md(x)·log n` is smaller.
    GossipBetter,
    /// The population-model bound `log n + n/x_max` is smaller.
    PopulationBetter,
    Tie,
}

/// Parallel-time convergence bounds of the gossip-model analysis and the
/// population-model analysis on the same start.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BoundComparison {
    pub monochromatic_distance: f64,
    /// `md(x)·log n`
    pub gossip_bound: f64,
    /// `log n + n/x_max`
    pub population_bound: f64,
    pub verdict: BoundVerdict,
    /// `x_max·k > n·log n`: above this support the gossip bound wins.
    /// Integer exact for base 2 when `n` is a power of two.
    pub crossover: bool,
}

/// `None` when `x_max = 0`.
pub fn bound_comparison(c: &Configuration, base: LogBase) -> Option<BoundComparison> {
    let md = monochromatic_distance(c)?;
    let n = c.n() as f64;
    let x_max = c.x_max() as f64;
    let log_n = base.log(n);
    let gossip_bound = md * log_n;
    let population_bound = log_n + n / x_max;
    let verdict = if gossip_bound < population_bound {
        BoundVerdict::GossipBetter
    } else if population_bound < gossip_bound {
        BoundVerdict::PopulationBetter
    } else {
        BoundVerdict::Tie
    };
    Some(BoundComparison {
        monochromatic_distance: md,
        gossip_bound,
        population_bound,
        verdict,
        crossover: crossover(c, base),
    })
}

fn crossover(c: &Configuration, base: LogBase) -> bool {
    let n = c.n();
    let lhs = c.x_max() as u128 * c.k() as u128;
    if base == LogBase::Two && n.is_power_of_two() {
        return lhs > n as u128 * n.trailing_zeros() as u128;
    }
    lhs as f64 > n as f64 * base.log(n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cfg(counts: &[u64], u: u64) -> Configuration {
        Configuration::new(counts.to_vec(), u).unwrap()
    }

    #[test]
    fn potential_values() {
        assert_eq!(potential_z(&cfg(&[4, 3, 1], 2), 1.0), 2.0);
        assert_eq!(potential_z(&cfg(&[8, 0], 0), 0.875), 1.0);
        assert_eq!(potential_z(&cfg(&[0, 0], 0), 3.0), 0.0);
    }

    #[test]
    fn phase_one_end_matches_potential_sign() {
        for u in 0..=10u64 {
            let c = cfg(&[6 - u.min(6), 4 - u.saturating_sub(6)], u);
            let ends = 2 * c.undecided() >= c.n() - c.x_max();
            assert_eq!(potential_z(&c, 1.0) <= 0.0, ends, "{c}");
        }
    }

    #[test]
    fn biases() {
        let b = bias_summary(&cfg(&[5, 3, 1], 0)).unwrap();
        assert_eq!((b.max_index, b.additive_bias), (0, 2));
        assert_eq!(b.multiplicative_bias, 5.0 / 3.0);
        let tie = bias_summary(&cfg(&[4, 4, 1], 0)).unwrap();
        assert_eq!((tie.max_index, tie.additive_bias), (0, 0));
        let mono = bias_summary(&cfg(&[9, 0, 0], 0)).unwrap();
        assert!(mono.multiplicative_bias.is_infinite());
        assert!(bias_summary(&cfg(&[0, 0, 0], 3)).is_none());
    }

    #[test]
    fn classification_cut() {
        let params = ThresholdParams::default();
        let n = 1_000_000u64;
        let window = params.significance_window(n);
        assert!((window - 19_931.57).abs() < 0.01);
        let below = 500_000 - 19_932 - 1;
        let c = cfg(&[500_000, below, 0], n - 500_000 - below);
        let th = params.thresholds(&c);
        assert!(th.important_cut <= th.significant_cut);
        let classes = classify_opinions(&c, &th);
        assert!(classes[0].significant && classes[0].important && !classes[0].small);
        assert!(!classes[1].significant && classes[1].important);
        assert!(classes[2].small && !classes[2].significant);
        assert_eq!(significant_count(&c, &params), 1);
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(ThresholdParams::with_alpha(0.0).is_err());
        assert!(ThresholdParams::with_alpha(f64::NAN).is_err());
        assert_eq!(ThresholdParams::with_alpha(2.0).unwrap().alpha, 2.0);
    }

    #[test]
    fn monochromatic_distance_values() {
        assert_eq!(monochromatic_distance(&cfg(&[3, 3, 3, 3], 0)), Some(4.0));
        assert_eq!(monochromatic_distance(&cfg(&[7, 0, 0], 1)), Some(1.0));
        assert_eq!(monochromatic_distance(&cfg(&[4, 2, 2], 0)), Some(1.5));
        assert_eq!(monochromatic_distance(&cfg(&[0, 0], 2)), None);
    }

    #[test]
    fn bound_comparison_regimes() {
        // uniform start: population bound wins, no crossover
        let uniform = bound_comparison(&cfg(&[256; 4], 0), LogBase::Two).unwrap();
        assert_eq!(uniform.verdict, BoundVerdict::PopulationBetter);
        assert!(!uniform.crossover);
        // consensus with k > log n: crossover
        let mut counts = vec![0u64; 12];
        counts[0] = 1024;
        let mono = bound_comparison(&cfg(&counts, 0), LogBase::Two).unwrap();
        assert!(mono.crossover);
        assert_eq!(mono.verdict, BoundVerdict::GossipBetter);
        // k = 2, x_1 = n/2
        let half = bound_comparison(&cfg(&[512, 512], 0), LogBase::Two).unwrap();
        assert!(!half.crossover);
        assert!(bound_comparison(&cfg(&[0, 0], 4), LogBase::Two).is_none());
    }
}
