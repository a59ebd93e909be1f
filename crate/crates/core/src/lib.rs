//! Core of the k-opinion undecided state dynamics toolkit.
//!
//! `n` anonymous agents each hold one of `k` opinions or are undecided.
//! A uniformly random ordered pair (responder, initiator) interacts at each
//! step and only the responder changes: it becomes undecided when it meets
//! a different opinion, and an undecided responder adopts the initiator's
//! opinion.
//!
//! The crate is `no_std` with `alloc`. It holds the domain types, the
//! closed-form transition probabilities, the count-level sampling engine,
//! phase tracking, a brute-force Markov-chain oracle for small instances,
//! and the majorization coupling with the two-opinion process.

#![no_std]

extern crate alloc;

pub mod config;
pub mod coupling;
pub mod engine;
pub mod error;
pub mod fenwick;
pub mod metrics;
pub mod oracle;
pub mod phases;
pub mod probs;

pub use config::{apply_interaction, Configuration, OpinionState};
pub use engine::{
    run_until, sample_productive_step, sample_step, Engine, InteractionEvent, Observer, RunOptions, RunResult,
    StepMode, StopReason,
};
pub use error::{Error, Result};
pub use metrics::{
    bias_summary, bound_comparison, classify_opinions, monochromatic_distance, potential_z, BiasSummary,
    BoundComparison, BoundVerdict, ClassificationThresholds, LogBase, OpinionClass, ThresholdParams,
};
pub use phases::{phase_predicates, PhaseReport, TraceSample};
pub use probs::{opinion_probs, pair_diff_probs, transition_probs, u_star, Prob, TransitionProbs};
