//! Summaries over trials and the two-sample tests used by the suites.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{HarnessError, Result};
use crate::trial::TrialRecord;

/// Linear-interpolation quantile of sorted data (Hyndman–Fan type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Distribution summary of one metric.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q01: f64,
    pub q99: f64,
    pub max: f64,
}

impl Summary {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Summary {
            count: sorted.len(),
            mean: mean(&sorted),
            median: quantile_sorted(&sorted, 0.5),
            q01: quantile_sorted(&sorted, 0.01),
            q99: quantile_sorted(&sorted, 0.99),
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateStats {
    pub trials: usize,
    pub consensus_trials: usize,
    pub total_interactions: Option<Summary>,
    /// `T1..T5` over the trials in which each was reached.
    pub hitting_times: Vec<Option<Summary>>,
    /// Wins per opinion, 1-based opinion `i + 1` at index `i`.
    pub wins: Vec<u64>,
    /// Fraction of trials won by the initial plurality opinion.
    pub plurality_win_rate: f64,
    /// Fraction of trials whose winner led at `T2`.
    pub winner_significant_at_t2_rate: f64,
    pub upper_violation_trials: usize,
    pub lower_violation_trials: usize,
    pub envelope_violations: u64,
}

impl AggregateStats {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let k = records.first().map_or(0, |r| r.k);
        let mut wins = vec![0u64; k];
        for w in records.iter().filter_map(|r| r.winner) {
            wins[w] += 1;
        }
        let rate = |pred: &dyn Fn(&TrialRecord) -> bool| {
            if records.is_empty() {
                0.0
            } else {
                records.iter().filter(|r| pred(r)).count() as f64 / records.len() as f64
            }
        };
        let totals: Vec<f64> = records.iter().map(|r| r.total_interactions as f64).collect();
        let hitting_times = (0..5)
            .map(|p| {
                let v: Vec<f64> = records
                    .iter()
                    .filter_map(|r| r.hitting_times[p])
                    .map(|t| t as f64)
                    .collect();
                Summary::of(&v)
            })
            .collect();
        AggregateStats {
            trials: records.len(),
            consensus_trials: records.iter().filter(|r| r.reached_consensus()).count(),
            total_interactions: Summary::of(&totals),
            hitting_times,
            wins,
            plurality_win_rate: rate(&|r| r.winner_was_initial_plurality),
            winner_significant_at_t2_rate: rate(&|r| r.winner_significant_at_t2()),
            upper_violation_trials: records.iter().filter(|r| r.upper_violations > 0).count(),
            lower_violation_trials: records.iter().filter(|r| r.lower_violations > 0).count(),
            envelope_violations: records.iter().map(TrialRecord::envelope_violations).sum(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WelchTest {
    pub t: f64,
    pub df: f64,
    /// `P[T ≤ t]` under equal means: small when `a` has the lower mean.
    pub p_less: f64,
}

/// Welch's unequal-variance t-test of `mean(a) < mean(b)`.
pub fn welch_less(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(HarnessError::Stats("each sample needs at least two values".into()));
    }
    let (va, vb) = (variance(a) / a.len() as f64, variance(b) / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(HarnessError::Stats("both samples are constant".into()));
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| HarnessError::Stats(e.to_string()))?;
    Ok(WelchTest {
        t,
        df,
        p_less: dist.cdf(t),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsTest {
    /// Largest gap between the empirical distribution functions.
    pub d: f64,
    /// Asymptotic p-value.
    pub p_value: f64,
}

/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2 j² λ²}`, the Kolmogorov tail.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += if j as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(HarnessError::Stats("empty sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = (na * nb / (na + nb)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    Ok(KsTest {
        d,
        p_value: kolmogorov_tail(lambda),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_seven_quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 2.5);
        assert!((quantile_sorted(&xs, 0.01) - 1.03).abs() < 1e-12);
        assert!((quantile_sorted(&xs, 0.99) - 3.97).abs() < 1e-12);
        let s = Summary::of(&[5.0, 1.0, 3.0]).unwrap();
        assert_eq!((s.median, s.max, s.mean), (3.0, 5.0, 3.0));
        assert!(s.q01 <= s.median && s.median <= s.q99 && s.q99 <= s.max);
        assert!(Summary::of(&[]).is_none());
    }

    #[test]
    fn kolmogorov_reference_points() {
        // standard critical values: Q(1.358) ≈ 0.05, Q(1.628) ≈ 0.01
        assert!((kolmogorov_tail(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_tail(1.628) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn ks_detects_a_shift() {
        let a: Vec<f64> = (0..500).map(f64::from).collect();
        let same: Vec<f64> = (0..500).map(|x| f64::from(x) + 0.5).collect();
        let shifted: Vec<f64> = (0..500).map(|x| f64::from(x) + 100.0).collect();
        assert!(ks_two_sample(&a, &same).unwrap().p_value > 0.5);
        let r = ks_two_sample(&a, &shifted).unwrap();
        assert!((r.d - 0.2).abs() < 1e-12);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn welch_direction() {
        let a = [1.0, 2.0, 3.0, 2.0, 1.5];
        let b = [5.0, 6.0, 7.0, 6.5, 5.5];
        assert!(welch_less(&a, &b).unwrap().p_less < 1e-3);
        assert!(welch_less(&b, &a).unwrap().p_less > 0.999);
        assert!(welch_less(&[1.0], &b).is_err());
    }
}
