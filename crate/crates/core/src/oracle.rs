//! Brute-force ground truth for small populations.
//!
//! Configurations with fixed `n` and `k` are the compositions of `n` into
//! `k + 1` parts `(x_1, …, x_k, u)`, enumerated in lexicographic order.
//! One-step distributions come from counting ordered pairs, never from the
//! closed forms, so they can be used to check those closed forms exactly.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::config::{apply_interaction, Configuration, OpinionState};
use crate::error::{Error, Result};
use crate::probs::{self, OpinionProbs, PairDiffProbs, Prob, TransitionProbs};

pub const DEFAULT_ENUMERATION_LIMIT: u128 = 2_000_000;

/// `C(a, b)`, saturating at `u128::MAX`.
fn binomial(a: u128, b: u128) -> u128 {
    let b = b.min(a - b.min(a));
    let mut acc: u128 = 1;
    for i in 0..b {
        acc = match acc.checked_mul(a - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Compositions of `m` into `parts` non-negative parts.
fn compositions(m: u64, parts: usize) -> u128 {
    if parts == 0 {
        return u128::from(m == 0);
    }
    binomial(m as u128 + parts as u128 - 1, parts as u128 - 1)
}

/// Dense bijection between the configurations of a chain and
/// `0..len()`.
#[derive(Clone, Debug)]
pub struct ConfigIndex {
    n: u64,
    k: usize,
    len: u128,
}

impl ConfigIndex {
    pub fn new(n: u64, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::TooFewOpinions(k));
        }
        Ok(ConfigIndex {
            n,
            k,
            len: compositions(n, k + 1),
        })
    }

    /// Number of configurations, `C(n + k, k)`.
    pub fn len(&self) -> u128 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn parts(c: &Configuration) -> impl Iterator<Item = u64> + '_ {
        c.types().map(|(_, x)| x)
    }

    pub fn index(&self, c: &Configuration) -> Result<u128> {
        if c.n() != self.n || c.k() != self.k {
            return Err(Error::ForeignConfiguration { n: self.n, k: self.k });
        }
        let p = self.k + 1;
        let mut rank = 0u128;
        let mut rem = self.n;
        for (pos, x) in Self::parts(c).enumerate().take(p - 1) {
            for v in 0..x {
                rank += compositions(rem - v, p - pos - 1);
            }
            rem -= x;
        }
        Ok(rank)
    }

    pub fn config(&self, mut rank: u128) -> Option<Configuration> {
        if rank >= self.len {
            return None;
        }
        let p = self.k + 1;
        let mut parts = Vec::with_capacity(p);
        let mut rem = self.n;
        for pos in 0..p - 1 {
            let mut v = 0;
            loop {
                let block = compositions(rem - v, p - pos - 1);
                if rank < block {
                    break;
                }
                rank -= block;
                v += 1;
            }
            parts.push(v);
            rem -= v;
        }
        Configuration::new(parts, rem).ok()
    }
}

/// All configurations with `n` agents and `k` opinions in lexicographic
/// order of `(x_1, …, x_k, u)`.
pub fn enumerate_configs(n: u64, k: usize, limit: u128) -> Result<Vec<Configuration>> {
    let index = ConfigIndex::new(n, k)?;
    if index.len() > limit {
        return Err(Error::EnumerationLimit {
            count: index.len(),
            limit,
        });
    }
    let p = k + 1;
    let mut parts = vec![0u64; p];
    parts[p - 1] = n;
    let mut out = Vec::with_capacity(index.len() as usize);
    loop {
        out.push(Configuration::new(parts[..k].to_vec(), parts[k])?);
        // advance the rightmost free part that still has budget behind it
        let Some(i) = (0..p - 1).rev().find(|&i| parts[i + 1..].iter().any(|&x| x > 0)) else {
            break;
        };
        parts[i] += 1;
        for x in &mut parts[i + 1..] {
            *x = 0;
        }
        parts[p - 1] = n - parts[..p - 1].iter().sum::<u64>();
    }
    Ok(out)
}

fn normalise(c: &Configuration, weights: BTreeMap<Configuration, u128>) -> BTreeMap<Configuration, Prob> {
    let n = c.n() as u128;
    if n == 0 {
        return BTreeMap::from([(c.clone(), Prob::one())]);
    }
    weights
        .into_iter()
        .map(|(next, w)| (next, Prob::new(w, n * n)))
        .collect()
}

/// Exact successor distribution of `c`, from the `(k + 1)²` ordered type
/// pairs weighted by `count_a · count_b / n²`.
pub fn one_step_distribution(c: &Configuration) -> BTreeMap<Configuration, Prob> {
    let mut weights: BTreeMap<Configuration, u128> = BTreeMap::new();
    for (responder, cr) in c.types().filter(|&(_, x)| x > 0) {
        for (initiator, ci) in c.types().filter(|&(_, x)| x > 0) {
            let mut next = c.clone();
            next.interact(responder, initiator);
            *weights.entry(next).or_default() += cr as u128 * ci as u128;
        }
    }
    normalise(c, weights)
}

/// The same distribution computed from all `n²` ordered pairs of
/// individual agents.
pub fn agent_pair_distribution(c: &Configuration) -> BTreeMap<Configuration, Prob> {
    let agents: Vec<OpinionState> = c
        .types()
        .flat_map(|(state, x)| core::iter::repeat_n(state, x as usize))
        .collect();
    let mut weights: BTreeMap<Configuration, u128> = BTreeMap::new();
    for &responder in &agents {
        for &initiator in &agents {
            let mut next = c.clone();
            let after = apply_interaction(responder, initiator);
            if after != responder {
                next.shift(responder, after);
            }
            *weights.entry(next).or_default() += 1;
        }
    }
    normalise(c, weights)
}

/// Source of the closed forms checked by [`verify_closed_forms_with`].
pub trait ClosedForms {
    fn transition(&self, c: &Configuration) -> TransitionProbs;
    fn opinion(&self, c: &Configuration, i: usize) -> OpinionProbs;
    fn pair(&self, c: &Configuration, i: usize, j: usize) -> PairDiffProbs;
}

/// The closed forms implemented in [`crate::probs`].
pub struct CoreClosedForms;

impl ClosedForms for CoreClosedForms {
    fn transition(&self, c: &Configuration) -> TransitionProbs {
        probs::transition_probs(c)
    }

    fn opinion(&self, c: &Configuration, i: usize) -> OpinionProbs {
        probs::opinion_probs(c, i).expect("index in range")
    }

    fn pair(&self, c: &Configuration, i: usize, j: usize) -> PairDiffProbs {
        probs::pair_diff_probs(c, i, j).expect("distinct indices in range")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Quantity {
    PMinus,
    PPlus,
    PTildePlus,
    OpinionPlus(usize),
    OpinionMinus(usize),
    OpinionTildePlus(usize),
    PairPlus(usize, usize),
    PairMinus(usize, usize),
    PairTildePlus(usize, usize),
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::PMinus => f.write_str("p_minus"),
            Quantity::PPlus => f.write_str("p_plus"),
            Quantity::PTildePlus => f.write_str("p_tilde_plus"),
            Quantity::OpinionPlus(i) => write!(f, "p_plus[{}]", i + 1),
            Quantity::OpinionMinus(i) => write!(f, "p_minus[{}]", i + 1),
            Quantity::OpinionTildePlus(i) => write!(f, "p_tilde_plus[{}]", i + 1),
            Quantity::PairPlus(i, j) => write!(f, "p_plus[{},{}]", i + 1, j + 1),
            Quantity::PairMinus(i, j) => write!(f, "p_minus[{},{}]", i + 1, j + 1),
            Quantity::PairTildePlus(i, j) => write!(f, "p_tilde_plus[{},{}]", i + 1, j + 1),
        }
    }
}

/// First disagreement between a closed form and the enumerated marginal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub config: Configuration,
    pub quantity: Quantity,
    pub closed_form: Option<Prob>,
    pub enumerated: Option<Prob>,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |p: &Option<Prob>| match p {
            Some(p) => alloc::format!("{p}"),
            None => "undefined".into(),
        };
        write!(
            f,
            "{} at {}: closed form {} vs enumeration {}",
            self.quantity,
            self.config,
            show(&self.closed_form),
            show(&self.enumerated)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosedFormReport {
    pub n: u64,
    pub k: usize,
    pub configurations: usize,
    /// Number of individual equalities checked.
    pub checks: usize,
    pub mismatch: Option<Mismatch>,
}

impl ClosedFormReport {
    pub fn passed(&self) -> bool {
        self.mismatch.is_none()
    }
}

fn conditional(up: Prob, down: Prob) -> Option<Prob> {
    let total = up + down;
    (!total.is_zero()).then(|| up / total)
}

/// Marginal moves read off a successor distribution.
struct Marginals {
    u: (Prob, Prob),
    opinion: Vec<(Prob, Prob)>,
}

impl Marginals {
    fn of(c: &Configuration, dist: &BTreeMap<Configuration, Prob>) -> Self {
        let mut u = (Prob::zero(), Prob::zero());
        let mut opinion = vec![(Prob::zero(), Prob::zero()); c.k()];
        for (next, p) in dist {
            match next.undecided() as i128 - c.undecided() as i128 {
                1 => u.0 += p,
                -1 => u.1 += p,
                _ => {}
            }
            for (i, slot) in opinion.iter_mut().enumerate() {
                match next.counts()[i] as i128 - c.counts()[i] as i128 {
                    1 => slot.0 += p,
                    -1 => slot.1 += p,
                    _ => {}
                }
            }
        }
        Marginals { u, opinion }
    }

    /// Moves of `x_i − x_j` by `±1`. Only one count changes per step, so
    /// the difference moves up exactly when `x_i` rises or `x_j` falls.
    fn pair(&self, dist: &BTreeMap<Configuration, Prob>, c: &Configuration, i: usize, j: usize) -> (Prob, Prob) {
        let mut up = Prob::zero();
        let mut down = Prob::zero();
        for (next, p) in dist {
            let di = next.counts()[i] as i128 - c.counts()[i] as i128;
            let dj = next.counts()[j] as i128 - c.counts()[j] as i128;
            match di - dj {
                1 => up += p,
                -1 => down += p,
                _ => {}
            }
        }
        (up, down)
    }
}

/// Checks the closed forms of [`crate::probs`] against ordered-pair
/// enumeration on every configuration with `n` agents and `k` opinions.
pub fn verify_closed_forms(n: u64, k: usize) -> Result<ClosedFormReport> {
    verify_closed_forms_with(n, k, &CoreClosedForms)
}

pub fn verify_closed_forms_with<F: ClosedForms + ?Sized>(n: u64, k: usize, forms: &F) -> Result<ClosedFormReport> {
    let configs = enumerate_configs(n, k, DEFAULT_ENUMERATION_LIMIT)?;
    let mut checks = 0usize;
    let total = configs.len();
    for c in configs {
        let dist = one_step_distribution(&c);
        let m = Marginals::of(&c, &dist);
        let mut expect = |quantity: Quantity, closed: Option<Prob>, enumerated: Option<Prob>| {
            checks += 1;
            (closed != enumerated).then(|| Mismatch {
                config: c.clone(),
                quantity,
                closed_form: closed,
                enumerated,
            })
        };
        let t = forms.transition(&c);
        let mut found = expect(Quantity::PPlus, Some(t.p_plus), Some(m.u.0))
            .or_else(|| expect(Quantity::PMinus, Some(t.p_minus), Some(m.u.1)))
            .or_else(|| expect(Quantity::PTildePlus, t.p_tilde_plus, conditional(m.u.0, m.u.1)));
        for i in 0..k {
            if found.is_some() {
                break;
            }
            let o = forms.opinion(&c, i);
            let (up, down) = m.opinion[i];
            found = expect(Quantity::OpinionPlus(i), Some(o.p_plus), Some(up))
                .or_else(|| expect(Quantity::OpinionMinus(i), Some(o.p_minus), Some(down)))
                .or_else(|| expect(Quantity::OpinionTildePlus(i), o.p_tilde_plus, conditional(up, down)));
            for j in (0..k).filter(|&j| j != i) {
                if found.is_some() {
                    break;
                }
                let d = forms.pair(&c, i, j);
                let (up, down) = m.pair(&dist, &c, i, j);
                found = expect(Quantity::PairPlus(i, j), Some(d.p_plus), Some(up))
                    .or_else(|| expect(Quantity::PairMinus(i, j), Some(d.p_minus), Some(down)))
                    .or_else(|| expect(Quantity::PairTildePlus(i, j), d.p_tilde_plus, conditional(up, down)));
            }
        }
        if found.is_some() {
            return Ok(ClosedFormReport {
                n,
                k,
                configurations: total,
                checks,
                mismatch: found,
            });
        }
    }
    Ok(ClosedFormReport {
        n,
        k,
        configurations: total,
        checks,
        mismatch: None,
    })
}

/// Limits for [`absorption_stats`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Maximum number of reachable configurations explored.
    pub enumeration_limit: u128,
    /// Up to this many transient configurations the solve is exact.
    pub exact_limit: usize,
    /// Up to this many the solve is dense floating point.
    pub float_limit: usize,
    /// Relative residual accepted from the floating-point solve.
    pub tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            enumeration_limit: DEFAULT_ENUMERATION_LIMIT,
            exact_limit: 120,
            float_limit: 4_000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExactAbsorption {
    pub win_prob: Vec<BigRational>,
    pub expected_time: BigRational,
}

/// Absorption statistics of one start configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct AbsorptionStats {
    /// Probability that consensus on each opinion is eventually reached.
    pub win_prob: Vec<f64>,
    /// Expected number of interactions until absorption.
    pub expected_time: f64,
    /// Present when the system was solved in exact arithmetic.
    pub exact: Option<ExactAbsorption>,
    /// Transient configurations reachable from the start.
    pub transient_states: usize,
}

fn to_big(p: &Prob) -> BigRational {
    BigRational::new(BigInt::from(*p.numer()), BigInt::from(*p.denom()))
}

/// Solves `a·x = b` for several right-hand sides by Gaussian elimination.
/// `prefer(candidate, current)` selects pivots. Returns `None` when singular.
fn gauss<T, P>(mut a: Vec<Vec<T>>, mut b: Vec<Vec<T>>, prefer: P) -> Option<Vec<Vec<T>>>
where
    T: Clone + Zero + PartialEq + core::ops::Sub<Output = T> + core::ops::Mul<Output = T> + core::ops::Div<Output = T>,
    P: Fn(&T, &T) -> bool,
{
    let size = a.len();
    for col in 0..size {
        let mut pivot = None;
        for row in col..size {
            if a[row][col].is_zero() {
                continue;
            }
            match pivot {
                None => pivot = Some(row),
                Some(p) if prefer(&a[row][col], &a[p][col]) => pivot = Some(row),
                _ => {}
            }
        }
        let p = pivot?;
        a.swap(col, p);
        b.swap(col, p);
        let head = a[col][col].clone();
        for row in col + 1..size {
            if a[row][col].is_zero() {
                continue;
            }
            let factor = a[row][col].clone() / head.clone();
            let (upper, lower) = a.split_at_mut(row);
            for (target, pivot_entry) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *target = target.clone() - factor.clone() * pivot_entry.clone();
            }
            for r in 0..b[row].len() {
                let v = b[row][r].clone() - factor.clone() * b[col][r].clone();
                b[row][r] = v;
            }
        }
    }
    let width = b.first().map_or(0, Vec::len);
    let mut x = vec![vec![T::zero(); width]; size];
    for row in (0..size).rev() {
        for r in 0..width {
            let mut acc = b[row][r].clone();
            for c in row + 1..size {
                acc = acc - a[row][c].clone() * x[c][r].clone();
            }
            x[row][r] = acc / a[row][row].clone();
        }
    }
    Some(x)
}

/// Transition structure of the configurations reachable from a start.
struct ReachableChain {
    states: Vec<Configuration>,
    rows: Vec<BTreeMap<usize, Prob>>,
}

impl ReachableChain {
    fn explore(start: &Configuration, limit: u128) -> Result<Self> {
        let mut ids: BTreeMap<Configuration, usize> = BTreeMap::new();
        let mut states = vec![start.clone()];
        let mut rows = Vec::new();
        ids.insert(start.clone(), 0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(id) = queue.pop_front() {
            let mut row = BTreeMap::new();
            for (next, p) in one_step_distribution(&states[id]) {
                let next_id = match ids.get(&next) {
                    Some(&j) => j,
                    None => {
                        let j = states.len();
                        if j as u128 >= limit {
                            return Err(Error::EnumerationLimit {
                                count: j as u128 + 1,
                                limit,
                            });
                        }
                        ids.insert(next.clone(), j);
                        states.push(next);
                        queue.push_back(j);
                        j
                    }
                };
                row.insert(next_id, p);
            }
            if rows.len() <= id {
                rows.resize(id + 1, BTreeMap::new());
            }
            rows[id] = row;
        }
        Ok(ReachableChain { states, rows })
    }

    /// Transient states that cannot reach any absorbing state.
    fn trapped(&self, transient: &[bool]) -> usize {
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); self.states.len()];
        for (from, row) in self.rows.iter().enumerate() {
            for &to in row.keys() {
                reverse[to].push(from);
            }
        }
        let mut seen: BTreeSet<usize> = (0..self.states.len()).filter(|&s| !transient[s]).collect();
        let mut queue: VecDeque<usize> = seen.iter().copied().collect();
        while let Some(s) = queue.pop_front() {
            for &prev in &reverse[s] {
                if seen.insert(prev) {
                    queue.push_back(prev);
                }
            }
        }
        self.states.len() - seen.len()
    }
}

/// Absorption probabilities per opinion and expected absorption time from
/// `start`, by first-step analysis over the reachable configurations.
pub fn absorption_stats(start: &Configuration, opts: &SolveOptions) -> Result<AbsorptionStats> {
    let k = start.k();
    if start.is_absorbing() {
        let win: Vec<BigRational> = (0..k)
            .map(|i| {
                if start.consensus_opinion() == Some(i) {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            })
            .collect();
        return Ok(AbsorptionStats {
            win_prob: win.iter().map(|w| w.to_f64().unwrap_or(f64::NAN)).collect(),
            expected_time: 0.0,
            exact: Some(ExactAbsorption {
                win_prob: win,
                expected_time: BigRational::zero(),
            }),
            transient_states: 0,
        });
    }

    let chain = ReachableChain::explore(start, opts.enumeration_limit)?;
    let transient: Vec<bool> = chain.states.iter().map(|s| !s.is_absorbing()).collect();
    let trapped = chain.trapped(&transient);
    if trapped > 0 {
        return Err(Error::NotAbsorbing(trapped));
    }
    let order: Vec<usize> = (0..chain.states.len()).filter(|&s| transient[s]).collect();
    let mut slot = vec![usize::MAX; chain.states.len()];
    for (pos, &s) in order.iter().enumerate() {
        slot[s] = pos;
    }
    let size = order.len();
    // start is transient, so it is the first entry of `order`
    debug_assert_eq!(order[0], 0);

    // unknowns: expected time, then win probability per opinion
    let build = |to_t: &dyn Fn(&Prob) -> BigRational| {
        let mut a = vec![vec![BigRational::zero(); size]; size];
        let mut b = vec![vec![BigRational::zero(); k + 1]; size];
        for (row, &s) in order.iter().enumerate() {
            a[row][row] = BigRational::one();
            b[row][0] = BigRational::one();
            for (&to, p) in &chain.rows[s] {
                let p = to_t(p);
                if transient[to] {
                    let col = slot[to];
                    a[row][col] = a[row][col].clone() - p;
                } else if let Some(w) = chain.states[to].consensus_opinion() {
                    b[row][w + 1] = b[row][w + 1].clone() + p;
                }
            }
        }
        (a, b)
    };

    if size <= opts.exact_limit {
        let (a, b) = build(&to_big);
        let x = gauss(a, b, |_, _| false).ok_or(Error::NotAbsorbing(size))?;
        let first = &x[0];
        let exact = ExactAbsorption {
            expected_time: first[0].clone(),
            win_prob: first[1..].to_vec(),
        };
        return Ok(AbsorptionStats {
            win_prob: exact.win_prob.iter().map(|w| w.to_f64().unwrap_or(f64::NAN)).collect(),
            expected_time: exact.expected_time.to_f64().unwrap_or(f64::NAN),
            exact: Some(exact),
            transient_states: size,
        });
    }
    if size > opts.float_limit {
        return Err(Error::SolveTooLarge {
            states: size,
            limit: opts.float_limit,
        });
    }

    let mut a = vec![vec![0.0f64; size]; size];
    let mut b = vec![vec![0.0f64; k + 1]; size];
    for (row, &s) in order.iter().enumerate() {
        a[row][row] = 1.0;
        b[row][0] = 1.0;
        for (&to, p) in &chain.rows[s] {
            let p = probs::to_f64(p);
            if transient[to] {
                a[row][slot[to]] -= p;
            } else if let Some(w) = chain.states[to].consensus_opinion() {
                b[row][w + 1] += p;
            }
        }
    }
    let x = gauss(a.clone(), b.clone(), |cand, cur| libm::fabs(*cand) > libm::fabs(*cur))
        .ok_or(Error::NotAbsorbing(size))?;
    let mut residual = 0.0f64;
    for row in 0..size {
        for r in 0..=k {
            let mut acc = -b[row][r];
            for (col, coef) in a[row].iter().enumerate() {
                acc += coef * x[col][r];
            }
            let scale = 1.0 + libm::fabs(x[row][r]);
            residual = residual.max(libm::fabs(acc) / scale);
        }
    }
    if residual.is_nan() || residual > opts.tolerance {
        return Err(Error::Residual { residual });
    }
    Ok(AbsorptionStats {
        win_prob: x[0][1..].to_vec(),
        expected_time: x[0][0],
        exact: None,
        transient_states: size,
    })
}
