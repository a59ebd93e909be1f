//! Configurations of the undecided state dynamics and the pairwise
//! transition rule.
//!
//! Opinions are indexed from zero internally. Serialized outputs of the
//! harness report them one-based.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// State of a single agent: one of `k` opinions or undecided.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OpinionState {
    Opinion(usize),
    Undecided,
}

impl OpinionState {
    pub fn is_decided(self) -> bool {
        matches!(self, OpinionState::Opinion(_))
    }

    pub fn opinion(self) -> Option<usize> {
        match self {
            OpinionState::Opinion(i) => Some(i),
            OpinionState::Undecided => None,
        }
    }
}

impl fmt::Display for OpinionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpinionState::Opinion(i) => write!(f, "{}", i + 1),
            OpinionState::Undecided => f.write_str("⊥"),
        }
    }
}

/// New state of the responder after it interacts with `initiator`.
///
/// The initiator never changes. A decided responder meeting a different
/// opinion becomes undecided; an undecided responder adopts a decided
/// initiator's opinion; everything else is a no-op.
pub fn apply_interaction(responder: OpinionState, initiator: OpinionState) -> OpinionState {
    use OpinionState::*;
    match (responder, initiator) {
        (Opinion(q), Opinion(q2)) if q != q2 => Undecided,
        (Undecided, Opinion(q2)) => Opinion(q2),
        (q, _) => q,
    }
}

/// Counts `x_1..x_k` of agents per opinion together with the undecided
/// count `u`. The population size `n = Σx_i + u` is fixed for the life of
/// the configuration.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Configuration {
    counts: Vec<u64>,
    undecided: u64,
    #[cfg_attr(feature = "serde", serde(skip))]
    n: u64,
}

impl Configuration {
    pub fn new(counts: Vec<u64>, undecided: u64) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::TooFewOpinions(counts.len()));
        }
        let n = counts
            .iter()
            .try_fold(undecided, |acc, &x| acc.checked_add(x))
            .ok_or(Error::PopulationOverflow)?;
        // n² must fit comfortably in u128 arithmetic
        if n > 1 << 62 {
            return Err(Error::PopulationOverflow);
        }
        Ok(Configuration { counts, undecided, n })
    }

    /// Population size `n`.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of opinions `k`.
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn undecided(&self) -> u64 {
        self.undecided
    }

    pub fn decided(&self) -> u64 {
        self.n - self.undecided
    }

    /// Number of agents in `state`.
    pub fn count(&self, state: OpinionState) -> u64 {
        match state {
            OpinionState::Opinion(i) => self.counts[i],
            OpinionState::Undecided => self.undecided,
        }
    }

    /// Support of the largest opinion, `x_max`.
    pub fn x_max(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Lowest index among the opinions with maximal support, or `None` when
    /// every agent is undecided.
    pub fn max_index(&self) -> Option<usize> {
        let x_max = self.x_max();
        if x_max == 0 {
            return None;
        }
        self.counts.iter().position(|&x| x == x_max)
    }

    /// Largest support among opinions other than `max_index`.
    pub fn second_max(&self) -> u64 {
        let Some(m) = self.max_index() else { return 0 };
        self.counts
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != m)
            .map(|(_, &x)| x)
            .max()
            .unwrap_or(0)
    }

    /// `r² = Σ x_i²`.
    pub fn sum_of_squares(&self) -> u128 {
        self.counts.iter().map(|&x| (x as u128) * (x as u128)).sum()
    }

    /// The opinion every agent holds, if any.
    pub fn consensus_opinion(&self) -> Option<usize> {
        if self.n == 0 {
            return None;
        }
        self.counts.iter().position(|&x| x == self.n)
    }

    /// True when no ordered pair of agents changes the configuration:
    /// consensus, all-undecided, or the empty population.
    pub fn is_absorbing(&self) -> bool {
        self.productive_weight() == 0
    }

    /// Number of ordered agent pairs whose interaction is productive,
    /// `n(n−u) − r²`. Dividing by `n²` gives the productive probability.
    pub fn productive_weight(&self) -> u128 {
        let n = self.n as u128;
        n * (n - self.undecided as u128) - self.sum_of_squares()
    }

    /// Applies one interaction between agents of the given types. Returns
    /// true when the responder changed state.
    ///
    /// Panics if no agent of either type exists.
    pub fn interact(&mut self, responder: OpinionState, initiator: OpinionState) -> bool {
        assert!(self.count(responder) > 0 && self.count(initiator) > 0);
        let next = apply_interaction(responder, initiator);
        if next == responder {
            return false;
        }
        self.shift(responder, next);
        true
    }

    /// Moves one agent from state `from` to state `to`.
    pub(crate) fn shift(&mut self, from: OpinionState, to: OpinionState) {
        *self.count_mut(from) -= 1;
        *self.count_mut(to) += 1;
    }

    fn count_mut(&mut self, state: OpinionState) -> &mut u64 {
        match state {
            OpinionState::Opinion(i) => &mut self.counts[i],
            OpinionState::Undecided => &mut self.undecided,
        }
    }

    /// Multiplies every count by `factor`.
    pub fn scaled(&self, factor: u64) -> Result<Self> {
        let counts = self
            .counts
            .iter()
            .map(|&x| x.checked_mul(factor).ok_or(Error::PopulationOverflow))
            .collect::<Result<Vec<_>>>()?;
        let undecided = self.undecided.checked_mul(factor).ok_or(Error::PopulationOverflow)?;
        Configuration::new(counts, undecided)
    }

    /// Iterates over every agent type with its count: opinions first, then
    /// undecided.
    pub fn types(&self) -> impl Iterator<Item = (OpinionState, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, &x)| (OpinionState::Opinion(i), x))
            .chain(core::iter::once((OpinionState::Undecided, self.undecided)))
    }

    pub(crate) fn check_opinion(&self, i: usize) -> Result<()> {
        if i < self.k() {
            Ok(())
        } else {
            Err(Error::OpinionOutOfRange { index: i, k: self.k() })
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("x=(")?;
        for (i, x) in self.counts.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "), u={}", self.undecided)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Configuration {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        struct Raw {
            counts: Vec<u64>,
            undecided: u64,
        }
        let raw = Raw::deserialize(d)?;
        Configuration::new(raw.counts, raw.undecided).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::OpinionState::*;
    use super::*;
    use alloc::vec;

    #[test]
    fn transition_rule() {
        assert_eq!(apply_interaction(Opinion(0), Opinion(1)), Undecided);
        assert_eq!(apply_interaction(Undecided, Opinion(1)), Opinion(1));
        assert_eq!(apply_interaction(Opinion(0), Opinion(0)), Opinion(0));
        assert_eq!(apply_interaction(Opinion(0), Undecided), Opinion(0));
        assert_eq!(apply_interaction(Undecided, Undecided), Undecided);
    }

    #[test]
    fn construction_checks() {
        assert_eq!(Configuration::new(vec![3], 0), Err(Error::TooFewOpinions(1)));
        assert_eq!(Configuration::new(vec![u64::MAX, 1], 0), Err(Error::PopulationOverflow));
        let c = Configuration::new(vec![2, 1], 1).unwrap();
        assert_eq!((c.n(), c.k(), c.decided()), (4, 2, 3));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let c = Configuration::new(vec![1, 4, 4], 0).unwrap();
        assert_eq!(c.max_index(), Some(1));
        assert_eq!(c.second_max(), 4);
        let all_undecided = Configuration::new(vec![0, 0], 5).unwrap();
        assert_eq!(all_undecided.max_index(), None);
        assert!(all_undecided.is_absorbing());
    }

    #[test]
    fn interact_conserves_population() {
        let mut c = Configuration::new(vec![2, 1], 1).unwrap();
        assert!(c.interact(Opinion(0), Opinion(1)));
        assert_eq!(c.counts(), &[1, 1]);
        assert_eq!(c.undecided(), 2);
        assert!(!c.interact(Opinion(0), Undecided));
        assert!(c.interact(Undecided, Opinion(1)));
        assert_eq!(c.counts().iter().sum::<u64>() + c.undecided(), 4);
    }
}
