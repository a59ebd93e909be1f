//! Sampling the sequential interaction process.
//!
//! The chain is simulated at the level of counts: agents are anonymous and
//! the transition depends only on the two types involved, so drawing the
//! responder's type and the initiator's type independently with
//! probability `count/n` each gives exactly the law of a uniformly random
//! ordered agent pair. Self-pairs are allowed and are always unproductive.
//!
//! Two stepping modes share one state:
//!
//! * [`StepMode::Exact`] performs every interaction.
//! * [`StepMode::ProductiveSkip`] draws the number of unproductive
//!   interactions before the next productive one from a geometric law and
//!   then draws the productive transition from its exact conditional law.

use alloc::vec::Vec;
use core::num::NonZeroU64;

use rand::Rng;

use crate::config::{Configuration, OpinionState};
use crate::error::{Error, Result};
use crate::fenwick::Fenwick;

/// Largest population the engine accepts; keeps `n²` inside 64 bits.
pub const MAX_POPULATION: u64 = u32::MAX as u64;

/// Populations above this default to [`StepMode::ProductiveSkip`].
pub const SKIP_MODE_THRESHOLD: u64 = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum StepMode {
    Exact,
    #[cfg_attr(feature = "serde", serde(rename = "skip"))]
    ProductiveSkip,
}

impl StepMode {
    pub fn default_for(n: u64) -> Self {
        if n > SKIP_MODE_THRESHOLD {
            StepMode::ProductiveSkip
        } else {
            StepMode::Exact
        }
    }
}

/// One sampled interaction. `t` is the number of interactions performed
/// including this one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InteractionEvent {
    pub responder: OpinionState,
    pub initiator: OpinionState,
    pub productive: bool,
    pub t: u64,
}

/// A productive transition: one responder moves between an opinion and
/// the undecided state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transition {
    pub from: OpinionState,
    pub to: OpinionState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum StopReason {
    Consensus,
    Cap,
    Predicate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub final_config: Configuration,
    pub interactions: u64,
    pub consensus_opinion: Option<usize>,
    pub stop_reason: StopReason,
}

/// Receives the configuration as a run progresses.
pub trait Observer {
    /// Called once before the first step, at `t = 0`.
    fn on_start(&mut self, _c: &Configuration) {}

    /// Called after every productive interaction.
    fn on_change(&mut self, _t: u64, _c: &Configuration) {}

    /// Called at the trace cadence with the configuration at time `t`.
    fn on_sample(&mut self, _t: u64, _c: &Configuration) {}
}

impl Observer for () {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOptions {
    pub mode: StepMode,
    /// The run stops once this many interactions have been performed.
    pub cap: u64,
    /// Trace cadence in interactions; `None` disables sampling.
    pub sample_every: Option<NonZeroU64>,
}

impl RunOptions {
    pub fn new(mode: StepMode, cap: u64) -> Self {
        RunOptions {
            mode,
            cap,
            sample_every: None,
        }
    }

    pub fn sample_every(mut self, every: u64) -> Self {
        self.sample_every = NonZeroU64::new(every);
        self
    }
}

/// Running state of one chain: the configuration, the interaction counter
/// and the cumulative weights used for drawing.
#[derive(Clone, Debug)]
pub struct Engine {
    config: Configuration,
    t: u64,
    /// Counts per type; index `k` is undecided.
    types: Fenwick,
    /// `x_i(n − x_i)` per opinion: ordered pairs in which an agent of
    /// opinion `i` is involved in a productive interaction.
    productive: Fenwick,
}

fn type_of(index: usize, k: usize) -> OpinionState {
    if index == k {
        OpinionState::Undecided
    } else {
        OpinionState::Opinion(index)
    }
}

impl Engine {
    pub fn new(config: Configuration) -> Result<Self> {
        if config.n() > MAX_POPULATION {
            return Err(Error::PopulationOverflow);
        }
        let n = config.n();
        let type_weights: Vec<u64> = config.types().map(|(_, c)| c).collect();
        let productive_weights: Vec<u64> = config.counts().iter().map(|&x| x * (n - x)).collect();
        Ok(Engine {
            types: Fenwick::new(&type_weights),
            productive: Fenwick::new(&productive_weights),
            config,
            t: 0,
        })
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn into_config(self) -> Configuration {
        self.config
    }

    /// Interactions performed so far.
    pub fn time(&self) -> u64 {
        self.t
    }

    /// Number of ordered agent pairs whose interaction is productive.
    pub fn productive_weight(&self) -> u64 {
        self.productive.total()
    }

    fn population_squared(&self) -> u64 {
        self.config.n() * self.config.n()
    }

    fn shift(&mut self, from: OpinionState, to: OpinionState) {
        self.config.shift(from, to);
        let k = self.config.k();
        let n = self.config.n();
        let opinion = from.opinion().or(to.opinion()).expect("transition touches an opinion");
        let x = self.config.counts()[opinion];
        self.types.set(opinion, x);
        self.types.set(k, self.config.undecided());
        self.productive.set(opinion, x * (n - x));
    }

    /// Performs the interaction between the agents at positions
    /// `responder_draw` and `initiator_draw` of the canonical type order
    /// (opinions by index, then undecided). Both draws lie in `[0, n)`.
    pub fn step_with_draws(&mut self, responder_draw: u64, initiator_draw: u64) -> InteractionEvent {
        let k = self.config.k();
        let responder = type_of(self.types.find(responder_draw), k);
        let initiator = type_of(self.types.find(initiator_draw), k);
        let next = crate::config::apply_interaction(responder, initiator);
        let productive = next != responder;
        if productive {
            self.shift(responder, next);
        }
        self.t += 1;
        InteractionEvent {
            responder,
            initiator,
            productive,
            t: self.t,
        }
    }

    /// One interaction with a uniformly random ordered pair of agents.
    ///
    /// Panics on an empty population.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> InteractionEvent {
        let n = self.config.n();
        let r = rng.random_range(0..n);
        let s = rng.random_range(0..n);
        self.step_with_draws(r, s)
    }

    /// Applies the productive transition selected by two draws:
    /// `weight_draw ∈ [0, productive_weight())` picks the opinion `i`
    /// involved, `side_draw ∈ [0, n − x_i)` picks whether an undecided
    /// responder adopts `i` (draws below `u`) or a responder of opinion `i`
    /// becomes undecided. Does not advance time.
    pub fn productive_with_draws(&mut self, weight_draw: u64, side_draw: u64) -> Transition {
        let i = self.productive.find(weight_draw);
        let x = self.config.counts()[i];
        debug_assert!(side_draw < self.config.n() - x);
        let transition = if side_draw < self.config.undecided() {
            Transition {
                from: OpinionState::Undecided,
                to: OpinionState::Opinion(i),
            }
        } else {
            Transition {
                from: OpinionState::Opinion(i),
                to: OpinionState::Undecided,
            }
        };
        self.shift(transition.from, transition.to);
        transition
    }

    /// Number of unproductive interactions before the next productive one.
    pub fn sample_skip<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        let w = self.productive.total();
        if w == 0 {
            return Err(Error::Absorbing);
        }
        let n2 = self.population_squared();
        if w >= n2 {
            return Ok(0);
        }
        let p = w as f64 / n2 as f64;
        let uniform = 1.0 - rng.random::<f64>();
        let skipped = libm::log(uniform) / libm::log1p(-p);
        Ok(if skipped >= u64::MAX as f64 {
            u64::MAX
        } else {
            skipped as u64
        })
    }

    fn draw_productive<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Transition {
        let w = rng.random_range(0..self.productive.total());
        let i = self.productive.find(w);
        let s = rng.random_range(0..self.config.n() - self.config.counts()[i]);
        self.productive_with_draws(w, s)
    }

    /// Skips the unproductive interactions and performs the next productive
    /// one. Returns the number skipped; time advances by that plus one.
    pub fn step_productive<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<u64> {
        let skipped = self.sample_skip(rng)?;
        self.draw_productive(rng);
        self.t = self.t.saturating_add(skipped).saturating_add(1);
        Ok(skipped)
    }

    /// Steps until `stop` holds, consensus is reached or `cap` interactions
    /// have been performed.
    ///
    /// `stop` is evaluated on the initial configuration and after every
    /// productive interaction; unproductive interactions cannot change its
    /// configuration argument.
    pub fn run_until<R, S, O>(&mut self, opts: &RunOptions, mut stop: S, rng: &mut R, observer: &mut O) -> RunResult
    where
        R: Rng + ?Sized,
        S: FnMut(&Configuration, u64) -> bool,
        O: Observer + ?Sized,
    {
        observer.on_start(&self.config);
        let every = opts.sample_every.map(NonZeroU64::get);
        let mut next_sample = match every {
            Some(e) => {
                if self.t.is_multiple_of(e) {
                    observer.on_sample(self.t, &self.config);
                }
                (self.t / e + 1).saturating_mul(e)
            }
            None => u64::MAX,
        };
        let reason = if stop(&self.config, self.t) {
            StopReason::Predicate
        } else if self.config.consensus_opinion().is_some() {
            StopReason::Consensus
        } else {
            loop {
                if self.t >= opts.cap {
                    break StopReason::Cap;
                }
                let changed = match opts.mode {
                    StepMode::Exact => {
                        let ev = self.step(rng);
                        if self.t == next_sample {
                            observer.on_sample(self.t, &self.config);
                            next_sample = next_sample.saturating_add(every.unwrap_or(u64::MAX));
                        }
                        ev.productive
                    }
                    StepMode::ProductiveSkip => {
                        let skipped = self.sample_skip(rng).unwrap_or(u64::MAX);
                        let t_next = self.t.saturating_add(skipped).saturating_add(1);
                        let fire = t_next <= opts.cap;
                        let horizon = if fire { t_next - 1 } else { opts.cap };
                        // marks passed while the configuration is unchanged
                        if let Some(e) = every {
                            if next_sample <= horizon {
                                let last = horizon / e * e;
                                observer.on_sample(last, &self.config);
                                next_sample = last.saturating_add(e);
                            }
                        }
                        if !fire {
                            self.t = opts.cap;
                            continue;
                        }
                        self.draw_productive(rng);
                        self.t = t_next;
                        if self.t == next_sample {
                            observer.on_sample(self.t, &self.config);
                            next_sample = next_sample.saturating_add(every.unwrap_or(u64::MAX));
                        }
                        true
                    }
                };
                if changed {
                    observer.on_change(self.t, &self.config);
                    if stop(&self.config, self.t) {
                        break StopReason::Predicate;
                    }
                    if self.config.consensus_opinion().is_some() {
                        break StopReason::Consensus;
                    }
                }
            }
        };
        RunResult {
            final_config: self.config.clone(),
            interactions: self.t,
            consensus_opinion: self.config.consensus_opinion(),
            stop_reason: reason,
        }
    }
}

/// One uniformly random interaction applied to a copy of `c`.
pub fn sample_step<R: Rng + ?Sized>(c: &Configuration, rng: &mut R) -> Result<(Configuration, InteractionEvent)> {
    let mut engine = Engine::new(c.clone())?;
    let ev = engine.step(rng);
    Ok((engine.into_config(), ev))
}

/// The next productive interaction applied to a copy of `c`, with the
/// number of unproductive interactions skipped before it.
pub fn sample_productive_step<R: Rng + ?Sized>(c: &Configuration, rng: &mut R) -> Result<(Configuration, u64)> {
    let mut engine = Engine::new(c.clone())?;
    let skipped = engine.step_productive(rng)?;
    Ok((engine.into_config(), skipped))
}

/// Runs the chain from `c` without an observer.
pub fn run_until<R, S>(c: &Configuration, opts: &RunOptions, stop: S, rng: &mut R) -> Result<RunResult>
where
    R: Rng + ?Sized,
    S: FnMut(&Configuration, u64) -> bool,
{
    let mut engine = Engine::new(c.clone())?;
    Ok(engine.run_until(opts, stop, rng, &mut ()))
}
