//! Step-by-step coupling of the k-opinion process with a two-opinion
//! process that merges every non-leading opinion into one.
//!
//! Both processes lay their agents out on the same `n` positions and every
//! step applies the same uniformly drawn ordered position pair to both. With
//! `m = min(u, ũ)` and `S = Σ_{i≥2} x_i` the layout is
//!
//! ```text
//! position   [0, x̃1)   [x̃1, +m)   [.., +S)       [a, n)
//! k-process  1         ⊥          2 … k          1^(x1−x̃1) ⊥^(u−m)
//! 2-process  1         ⊥          2              ⊥^(ũ−m)   2^(x̃2−S)
//! ```
//!
//! where `a = x̃1 + m + S`. The layout is rebuilt from the counts after every
//! step and is well formed while `x1 ≥ x̃1` and `x1 + u ≥ x̃1 + ũ`.
//! Opinion 1 is index 0 throughout.

use alloc::vec::Vec;

use rand::Rng;

use crate::config::{apply_interaction, Configuration, OpinionState};
use crate::error::{Error, Result};

const LEADER: usize = 0;

/// Which of the two layouts applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum LayoutCase {
    /// `ũ ≥ u`: the tail holds ones against undecided, then ones against twos.
    TwoHasMoreUndecided,
    /// `ũ < u`: the tail holds ones, then undecided, all against twos.
    KHasMoreUndecided,
}

/// Paired configurations of the coupled processes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledState {
    k_config: Configuration,
    two_config: Configuration,
    t: u64,
    /// `labels[i]` is the original index of relabelled opinion `i`.
    labels: Vec<usize>,
}

impl CoupledState {
    /// Couples `c` with its two-opinion projection. The strict plurality
    /// opinion of `c` becomes opinion 1; the others keep their relative
    /// order.
    pub fn new(c: &Configuration) -> Result<Self> {
        let leader = c.max_index().ok_or(Error::NoStrictPlurality)?;
        if c.counts().iter().filter(|&&x| x == c.x_max()).count() != 1 {
            return Err(Error::NoStrictPlurality);
        }
        let mut labels = Vec::with_capacity(c.k());
        labels.push(leader);
        labels.extend((0..c.k()).filter(|&i| i != leader));
        let counts: Vec<u64> = labels.iter().map(|&i| c.counts()[i]).collect();
        let k_config = Configuration::new(counts, c.undecided())?;
        let rest = k_config.n() - k_config.counts()[LEADER] - k_config.undecided();
        let two_config = Configuration::new(alloc::vec![k_config.counts()[LEADER], rest], c.undecided())?;
        Ok(CoupledState {
            k_config,
            two_config,
            t: 0,
            labels,
        })
    }

    /// The k-opinion side, with the leader relabelled to index 0.
    pub fn k_config(&self) -> &Configuration {
        &self.k_config
    }

    pub fn two_config(&self) -> &Configuration {
        &self.two_config
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    /// Original index of relabelled opinion `i`.
    pub fn original_label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn majorization_holds(&self) -> bool {
        let (x1, u) = (self.k_config.counts()[LEADER], self.k_config.undecided());
        let (y1, w) = (self.two_config.counts()[LEADER], self.two_config.undecided());
        x1 >= y1 && x1 + u >= y1 + w
    }

    pub fn case(&self) -> LayoutCase {
        if self.two_config.undecided() >= self.k_config.undecided() {
            LayoutCase::TwoHasMoreUndecided
        } else {
            LayoutCase::KHasMoreUndecided
        }
    }

    fn shared_undecided(&self) -> u64 {
        self.k_config.undecided().min(self.two_config.undecided())
    }

    fn others(&self) -> u64 {
        self.k_config.n() - self.k_config.counts()[LEADER] - self.k_config.undecided()
    }

    /// End of the aligned prefix, `a = x̃1 + min(u, ũ) + Σ_{i≥2} x_i`.
    pub fn boundary(&self) -> u64 {
        self.two_config.counts()[LEADER] + self.shared_undecided() + self.others()
    }

    /// State of the k-process agent at `pos`.
    pub fn agent_k(&self, pos: u64) -> OpinionState {
        let y1 = self.two_config.counts()[LEADER];
        let m = self.shared_undecided();
        if pos < y1 {
            return OpinionState::Opinion(LEADER);
        }
        if pos < y1 + m {
            return OpinionState::Undecided;
        }
        let mut offset = pos - y1 - m;
        if offset < self.others() {
            for (i, &x) in self.k_config.counts().iter().enumerate().skip(1) {
                if offset < x {
                    return OpinionState::Opinion(i);
                }
                offset -= x;
            }
        }
        let tail = pos - self.boundary();
        if tail < self.k_config.counts()[LEADER].saturating_sub(y1) {
            OpinionState::Opinion(LEADER)
        } else {
            OpinionState::Undecided
        }
    }

    /// State of the two-process agent at `pos`.
    pub fn agent_two(&self, pos: u64) -> OpinionState {
        let y1 = self.two_config.counts()[LEADER];
        let m = self.shared_undecided();
        if pos < y1 {
            return OpinionState::Opinion(LEADER);
        }
        if pos < y1 + m {
            return OpinionState::Undecided;
        }
        if pos < self.boundary() {
            return OpinionState::Opinion(1);
        }
        let tail = pos - self.boundary();
        if tail < self.two_config.undecided() - m {
            OpinionState::Undecided
        } else {
            OpinionState::Opinion(1)
        }
    }

    /// Materialises `(v, ṽ)`.
    pub fn vectors(&self) -> (Vec<OpinionState>, Vec<OpinionState>) {
        let n = self.k_config.n();
        (
            (0..n).map(|p| self.agent_k(p)).collect(),
            (0..n).map(|p| self.agent_two(p)).collect(),
        )
    }

    /// Whether the materialised vectors reproduce both configurations.
    pub fn layout_matches_counts(&self) -> bool {
        let (v, w) = self.vectors();
        let tally = |agents: &[OpinionState], c: &Configuration| {
            c.types()
                .all(|(s, x)| agents.iter().filter(|&&a| a == s).count() as u64 == x)
        };
        tally(&v, &self.k_config) && tally(&w, &self.two_config)
    }

    /// Applies the interaction of responder position `i` with initiator
    /// position `j` to both processes. Returns whether each side changed.
    pub fn step_at(&mut self, i: u64, j: u64) -> (bool, bool) {
        let (vi, vj) = (self.agent_k(i), self.agent_k(j));
        let (wi, wj) = (self.agent_two(i), self.agent_two(j));
        self.t += 1;
        (apply(&mut self.k_config, vi, vj), apply(&mut self.two_config, wi, wj))
    }

    /// One identity-coupled step with a uniform ordered position pair.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (bool, bool) {
        let n = self.k_config.n();
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        self.step_at(i, j)
    }
}

fn apply(c: &mut Configuration, responder: OpinionState, initiator: OpinionState) -> bool {
    let next = apply_interaction(responder, initiator);
    if next != responder {
        c.shift(responder, next);
        true
    } else {
        false
    }
}

/// Outcome of one coupled run.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CoupledRun {
    /// Majorization held after every executed step.
    pub held: bool,
    pub first_violation: Option<u64>,
    pub t_consensus_k: Option<u64>,
    pub t_consensus_two: Option<u64>,
    /// Winner of the k-process in original labels.
    pub winner_k: Option<usize>,
    /// Winner of the two-process; `Some(0)` is the leader.
    pub winner_two: Option<usize>,
    pub interactions: u64,
}

impl CoupledRun {
    /// `Some(t_k ≤ t_2)` when the leader wins in both processes.
    pub fn k_not_slower(&self, leader: usize) -> Option<bool> {
        match (self.winner_k, self.winner_two, self.t_consensus_k, self.t_consensus_two) {
            (Some(wk), Some(0), Some(tk), Some(t2)) if wk == leader => Some(tk <= t2),
            _ => None,
        }
    }
}

/// Runs the coupled pair from `c` until both absorb, the cap is reached, or
/// majorization fails, checking majorization after every step.
pub fn run_coupled<R: Rng + ?Sized>(c: &Configuration, cap: u64, rng: &mut R) -> Result<CoupledRun> {
    let mut state = CoupledState::new(c)?;
    let mut t_k = state.k_config.is_absorbing().then_some(0);
    let mut t_two = state.two_config.is_absorbing().then_some(0);
    let mut first_violation = None;
    while state.t < cap && (t_k.is_none() || t_two.is_none()) {
        state.step(rng);
        if !state.majorization_holds() {
            first_violation = Some(state.t);
            break;
        }
        if t_k.is_none() && state.k_config.is_absorbing() {
            t_k = Some(state.t);
        }
        if t_two.is_none() && state.two_config.is_absorbing() {
            t_two = Some(state.t);
        }
    }
    Ok(CoupledRun {
        held: first_violation.is_none(),
        first_violation,
        t_consensus_k: t_k,
        t_consensus_two: t_two,
        winner_k: state.k_config.consensus_opinion().map(|i| state.labels[i]),
        winner_two: state.two_config.consensus_opinion(),
        interactions: state.t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;
    use OpinionState::{Opinion, Undecided};

    fn cfg(counts: &[u64], u: u64) -> Configuration {
        Configuration::new(counts.to_vec(), u).unwrap()
    }

    /// Abstract symbol of a k-process state: 1, ⊥, 2 or ">2" (as 3).
    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    enum Sym {
        One,
        Bot,
        Two,
        Above,
    }

    fn sym(s: OpinionState) -> Sym {
        match s {
            Undecided => Sym::Bot,
            Opinion(0) => Sym::One,
            Opinion(1) => Sym::Two,
            Opinion(_) => Sym::Above,
        }
    }

    fn concrete(s: Sym) -> OpinionState {
        match s {
            Sym::One => Opinion(0),
            Sym::Bot => Undecided,
            Sym::Two => Opinion(1),
            Sym::Above => Opinion(2),
        }
    }

    type Row = [Sym; 6];

    use Sym::{Above as G, Bot as B, One as I, Two as T};

    /// Responder and initiator columns `(v_i, ṽ_i, v_j, ṽ_j)` and the
    /// responder's next states `(v_i', ṽ_i')`.
    const BOTH_ALIGNED: [Row; 6] = [
        [I, I, G, T, B, B],
        [B, B, G, T, G, T],
        [T, T, G, T, B, T],
        [G, T, I, I, B, B],
        [G, T, B, B, G, T],
        [G, T, T, T, B, T],
    ];

    const RESPONDER_ALIGNED: [Row; 12] = [
        [I, I, B, T, I, B],
        [I, I, I, B, I, I],
        [I, I, I, T, I, B],
        [B, B, B, T, B, T],
        [B, B, I, B, I, B],
        [B, B, I, T, I, T],
        [T, T, B, T, T, T],
        [T, T, I, B, B, T],
        [T, T, I, T, B, T],
        [G, T, B, T, G, T],
        [G, T, I, B, B, T],
        [G, T, I, T, B, T],
    ];

    const INITIATOR_ALIGNED: [Row; 12] = [
        [B, T, I, I, I, B],
        [I, B, I, I, I, I],
        [I, T, I, I, I, B],
        [B, T, B, B, B, T],
        [I, B, B, B, I, B],
        [I, T, B, B, I, T],
        [B, T, T, T, T, T],
        [I, B, T, T, B, T],
        [I, T, T, T, B, T],
        [B, T, G, T, G, T],
        [I, B, G, T, B, T],
        [I, T, G, T, B, T],
    ];

    const NEITHER_ALIGNED: [Row; 9] = [
        [I, B, I, B, I, B],
        [I, B, I, T, I, T],
        [I, B, B, T, I, T],
        [I, T, I, B, I, T],
        [I, T, I, T, I, T],
        [I, T, B, T, I, T],
        [B, T, I, B, I, T],
        [B, T, I, T, I, T],
        [B, T, B, T, B, T],
    ];

    fn tables() -> [&'static [Row]; 4] {
        [&BOTH_ALIGNED, &RESPONDER_ALIGNED, &INITIATOR_ALIGNED, &NEITHER_ALIGNED]
    }

    #[test]
    fn listed_rows_follow_both_transition_functions() {
        for table in tables() {
            for row in table {
                let k_next = apply_interaction(concrete(row[0]), concrete(row[2]));
                let two_next = apply_interaction(concrete(row[1]), concrete(row[3]));
                assert_eq!(sym(k_next), row[4], "{row:?}");
                assert_eq!(sym(two_next), row[5], "{row:?}");
            }
        }
    }

    /// Every ordered position pair of `s` either has identical types on
    /// both sides, is the both-differ case, or is a row of the table for
    /// its region; its successors agree with that row.
    fn realised_pairs_are_listed(s: &CoupledState) {
        let n = s.k_config().n();
        let a = s.boundary();
        for i in 0..n {
            for j in 0..n {
                let (vi, wi, vj, wj) = (s.agent_k(i), s.agent_two(i), s.agent_k(j), s.agent_two(j));
                let (ki, kj) = (sym(vi), sym(vj));
                let (ti, tj) = (sym(wi), sym(wj));
                let same = |k: Sym, t: Sym| k == t;
                let table: &[Row] = match (i < a, j < a) {
                    (true, true) => &BOTH_ALIGNED,
                    (true, false) => &RESPONDER_ALIGNED,
                    (false, true) => &INITIATOR_ALIGNED,
                    (false, false) => &NEITHER_ALIGNED,
                };
                if i < a && j < a {
                    if same(ki, ti) && same(kj, tj) {
                        continue;
                    }
                    if !same(ki, ti) && !same(kj, tj) {
                        assert_eq!((ki, ti, kj, tj), (G, T, G, T));
                        continue;
                    }
                }
                let row = table
                    .iter()
                    .find(|r| r[..4] == [ki, ti, kj, tj])
                    .unwrap_or_else(|| panic!("unlisted pair {:?} at ({i},{j}) in {}", [ki, ti, kj, tj], s.k_config()));
                let k_next = apply_interaction(vi, vj);
                let two_next = apply_interaction(wi, wj);
                assert_eq!([sym(k_next), sym(two_next)], [row[4], row[5]]);
            }
        }
    }

    #[test]
    fn layout_pairs_match_the_case_tables() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let mut cases = [false; 2];
        for start in [cfg(&[6, 2, 1, 1], 2), cfg(&[5, 2, 2], 3), cfg(&[7, 1, 1, 1], 0)] {
            let mut s = CoupledState::new(&start).unwrap();
            for _ in 0..400 {
                if !s.majorization_holds() {
                    break;
                }
                assert!(s.layout_matches_counts());
                realised_pairs_are_listed(&s);
                cases[(s.case() == LayoutCase::KHasMoreUndecided) as usize] = true;
                s.step(&mut rng);
            }
        }
        assert_eq!(cases, [true, true]);
    }

    #[test]
    fn projection_sums_other_opinions() {
        let s = CoupledState::new(&cfg(&[6, 2, 1], 0)).unwrap();
        assert_eq!(s.two_config(), &cfg(&[6, 3], 0));
        assert!(s.majorization_holds());
        assert_eq!(s.boundary(), 9);
    }

    #[test]
    fn leader_is_relabelled() {
        let s = CoupledState::new(&cfg(&[1, 2, 6], 1)).unwrap();
        assert_eq!(s.k_config(), &cfg(&[6, 1, 2], 1));
        assert_eq!(s.original_label(0), 2);
        assert_eq!(s.two_config(), &cfg(&[6, 3], 1));
        assert_eq!(CoupledState::new(&cfg(&[3, 3, 1], 0)), Err(Error::NoStrictPlurality));
        assert_eq!(CoupledState::new(&cfg(&[0, 0], 4)), Err(Error::NoStrictPlurality));
    }

    #[test]
    fn initial_vectors_follow_the_layout() {
        let s = CoupledState::new(&cfg(&[3, 1, 2], 2)).unwrap();
        let (v, w) = s.vectors();
        let one = Opinion(0);
        assert_eq!(
            v,
            vec![one, one, one, Undecided, Undecided, Opinion(1), Opinion(2), Opinion(2)]
        );
        assert_eq!(
            w,
            vec![one, one, one, Undecided, Undecided, Opinion(1), Opinion(1), Opinion(1)]
        );
    }

    #[test]
    fn spot_check_two_meets_above_two() {
        // responder holds opinion 2 on both sides, initiator holds 3 vs 2
        let mut s = CoupledState::new(&cfg(&[3, 1, 2], 0)).unwrap();
        assert_eq!((s.agent_k(3), s.agent_two(3)), (Opinion(1), Opinion(1)));
        assert_eq!((s.agent_k(4), s.agent_two(4)), (Opinion(2), Opinion(1)));
        assert_eq!(s.step_at(3, 4), (true, false));
        assert_eq!(s.k_config(), &cfg(&[3, 0, 2], 1));
        assert_eq!(s.two_config(), &cfg(&[3, 3], 0));
        assert!(s.majorization_holds());
        assert!(s.layout_matches_counts());
    }

    #[test]
    fn two_opinions_stay_identical() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let mut s = CoupledState::new(&cfg(&[7, 4], 2)).unwrap();
        for _ in 0..2_000 {
            s.step(&mut rng);
            assert_eq!(s.k_config(), s.two_config());
            let (v, w) = s.vectors();
            assert_eq!(v, w);
        }
    }

    #[test]
    fn zero_cap_returns_immediately() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0);
        let run = run_coupled(&cfg(&[5, 2, 2], 0), 0, &mut rng).unwrap();
        assert!(run.held);
        assert_eq!(run.interactions, 0);
        assert_eq!((run.t_consensus_k, run.t_consensus_two), (None, None));
    }

    #[test]
    fn absorbing_pair_does_not_move() {
        let mut s = CoupledState::new(&cfg(&[9, 0, 0], 0)).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                assert_eq!(s.step_at(i, j), (false, false));
            }
        }
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(0);
        let run = run_coupled(&cfg(&[9, 0, 0], 0), 100, &mut rng).unwrap();
        assert_eq!(
            (run.t_consensus_k, run.t_consensus_two, run.interactions),
            (Some(0), Some(0), 0)
        );
    }

    #[test]
    fn short_runs_keep_majorization() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
        for _ in 0..50 {
            let run = run_coupled(&cfg(&[20, 4, 3, 3], 0), 1_000_000, &mut rng).unwrap();
            assert!(run.held);
            assert!(run.t_consensus_k.is_some() && run.t_consensus_two.is_some());
            if let Some(ok) = run.k_not_slower(0) {
                assert!(ok);
            }
        }
    }
}
