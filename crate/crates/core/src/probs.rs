//! Closed-form one-step transition probabilities.
//!
//! Every probability is a count of ordered agent pairs divided by `n²`, kept
//! as an exact reduced rational. `*_f64` accessors give floating mirrors.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::config::Configuration;
use crate::error::{Error, Result};

/// Exact probability.
pub type Prob = Ratio<u128>;

fn over_n2(num: u128, c: &Configuration) -> Prob {
    let n = c.n() as u128;
    if n == 0 {
        return Prob::zero();
    }
    Prob::new(num, n * n)
}

/// `up / (up + down)`, undefined when neither move is possible.
fn conditional(up: Prob, down: Prob) -> Option<Prob> {
    let total = up + down;
    if total.is_zero() {
        None
    } else {
        Some(up / total)
    }
}

pub fn to_f64(p: &Prob) -> f64 {
    p.to_f64().unwrap_or(f64::NAN)
}

/// Probabilities that the undecided count moves by one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionProbs {
    /// `P[u decreases] = u(n−u)/n²`.
    pub p_minus: Prob,
    /// `P[u increases] = ((n−u)² − r²)/n²`.
    pub p_plus: Prob,
    /// `P[u increases | the step is productive]`.
    pub p_tilde_plus: Option<Prob>,
    /// `r² = Σ x_i²`.
    pub r_squared: u128,
}

impl TransitionProbs {
    /// Probability that the step changes the configuration.
    pub fn p_productive(&self) -> Prob {
        self.p_minus + self.p_plus
    }

    pub fn p_minus_f64(&self) -> f64 {
        to_f64(&self.p_minus)
    }

    pub fn p_plus_f64(&self) -> f64 {
        to_f64(&self.p_plus)
    }

    pub fn p_tilde_plus_f64(&self) -> Option<f64> {
        self.p_tilde_plus.as_ref().map(to_f64)
    }
}

pub fn transition_probs(c: &Configuration) -> TransitionProbs {
    let n = c.n() as u128;
    let u = c.undecided() as u128;
    let r_squared = c.sum_of_squares();
    let p_minus = over_n2(u * (n - u), c);
    let p_plus = over_n2((n - u) * (n - u) - r_squared, c);
    TransitionProbs {
        p_tilde_plus: conditional(p_plus, p_minus),
        p_minus,
        p_plus,
        r_squared,
    }
}

/// Probabilities that a single opinion's support moves by one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpinionProbs {
    /// `u·x_i/n²`
    pub p_plus: Prob,
    /// `x_i(n−u−x_i)/n²`
    pub p_minus: Prob,
    pub p_tilde_plus: Option<Prob>,
}

pub fn opinion_probs(c: &Configuration, i: usize) -> Result<OpinionProbs> {
    c.check_opinion(i)?;
    let n = c.n() as u128;
    let u = c.undecided() as u128;
    let x = c.counts()[i] as u128;
    let p_plus = over_n2(u * x, c);
    let p_minus = over_n2(x * (n - u - x), c);
    Ok(OpinionProbs {
        p_tilde_plus: conditional(p_plus, p_minus),
        p_plus,
        p_minus,
    })
}

/// Probabilities that the difference `x_i − x_j` moves by one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairDiffProbs {
    /// `(u·x_i + x_j(n−u−x_j))/n²`
    pub p_plus: Prob,
    /// `(u·x_j + x_i(n−u−x_i))/n²`
    pub p_minus: Prob,
    pub p_tilde_plus: Option<Prob>,
}

pub fn pair_diff_probs(c: &Configuration, i: usize, j: usize) -> Result<PairDiffProbs> {
    c.check_opinion(i)?;
    c.check_opinion(j)?;
    if i == j {
        return Err(Error::SameOpinion(i));
    }
    let n = c.n() as u128;
    let u = c.undecided() as u128;
    let xi = c.counts()[i] as u128;
    let xj = c.counts()[j] as u128;
    let p_plus = over_n2(u * xi + xj * (n - u - xj), c);
    let p_minus = over_n2(u * xj + xi * (n - u - xi), c);
    Ok(PairDiffProbs {
        p_tilde_plus: conditional(p_plus, p_minus),
        p_plus,
        p_minus,
    })
}

/// The unstable equilibrium `u* = n(k−1)/(2k−1)` of the undecided count.
pub fn u_star(n: u64, k: usize) -> f64 {
    let k = k as f64;
    n as f64 * (k - 1.0) / (2.0 * k - 1.0)
}

/// [`u_star`] as an exact rational.
pub fn u_star_exact(n: u64, k: usize) -> Prob {
    let k = k as u128;
    Prob::new(n as u128 * (k - 1), 2 * k - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn p(num: u128, den: u128) -> Prob {
        Prob::new(num, den)
    }

    fn sample() -> Configuration {
        Configuration::new(vec![2, 1], 1).unwrap()
    }

    #[test]
    fn undecided_moves_on_small_instance() {
        let t = transition_probs(&sample());
        assert_eq!(t.p_minus, p(3, 16));
        assert_eq!(t.p_plus, p(4, 16));
        assert_eq!(t.p_tilde_plus, Some(p(4, 7)));
        assert_eq!(t.r_squared, 5);
    }

    #[test]
    fn no_undecided_means_no_decrease() {
        let c = Configuration::new(vec![3, 2, 2], 0).unwrap();
        assert!(transition_probs(&c).p_minus.is_zero());
    }

    #[test]
    fn consensus_is_absorbing() {
        let c = Configuration::new(vec![5, 0, 0], 0).unwrap();
        let t = transition_probs(&c);
        assert!(t.p_minus.is_zero() && t.p_plus.is_zero());
        assert_eq!(t.p_tilde_plus, None);
    }

    #[test]
    fn single_opinion_moves() {
        let c = sample();
        let o1 = opinion_probs(&c, 0).unwrap();
        assert_eq!((o1.p_plus, o1.p_minus), (p(2, 16), p(2, 16)));
        let o2 = opinion_probs(&c, 1).unwrap();
        assert_eq!((o2.p_plus, o2.p_minus), (p(1, 16), p(2, 16)));
        assert_eq!(o2.p_tilde_plus, Some(p(1, 3)));

        let extinct = Configuration::new(vec![3, 0], 1).unwrap();
        let o = opinion_probs(&extinct, 1).unwrap();
        assert!(o.p_plus.is_zero() && o.p_minus.is_zero());
        assert_eq!(o.p_tilde_plus, None);
        assert!(opinion_probs(&extinct, 2).is_err());
    }

    #[test]
    fn pair_difference_moves() {
        let c = sample();
        let d = pair_diff_probs(&c, 0, 1).unwrap();
        assert_eq!((d.p_plus, d.p_minus), (p(4, 16), p(3, 16)));

        let sym = Configuration::new(vec![2, 2, 1], 1).unwrap();
        let d = pair_diff_probs(&sym, 0, 1).unwrap();
        assert_eq!(d.p_plus, d.p_minus);

        let consensus = Configuration::new(vec![4, 0], 0).unwrap();
        let d = pair_diff_probs(&consensus, 0, 1).unwrap();
        assert!(d.p_plus.is_zero() && d.p_minus.is_zero() && d.p_tilde_plus.is_none());
        assert_eq!(pair_diff_probs(&c, 1, 1), Err(Error::SameOpinion(1)));
    }

    #[test]
    fn equilibrium_values() {
        assert_eq!(u_star(300, 2), 100.0);
        assert_eq!(u_star(500, 3), 200.0);
        assert_eq!(u_star_exact(500, 3), p(200, 1));
        let big = u_star(1000, 1000);
        assert!(big < 500.0 && big > 499.0);
    }
}
