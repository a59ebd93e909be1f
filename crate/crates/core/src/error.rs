use thiserror::Error;

/// Errors produced by the core crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("need at least two opinions, got {0}")]
    TooFewOpinions(usize),
    #[error("population size overflows 64 bits")]
    PopulationOverflow,
    #[error("opinion index {index} out of range for k = {k}")]
    OpinionOutOfRange { index: usize, k: usize },
    #[error("pair quantities need two distinct opinions, got {0} twice")]
    SameOpinion(usize),
    #[error("alpha must be positive and finite")]
    InvalidAlpha,
    #[error("configuration is absorbing, no productive interaction exists")]
    Absorbing,
    #[error("enumerating {count} configurations exceeds the limit of {limit}")]
    EnumerationLimit { count: u128, limit: u128 },
    #[error("configuration does not belong to the chain with n = {n}, k = {k}")]
    ForeignConfiguration { n: u64, k: usize },
    #[error("{0} transient configurations cannot reach an absorbing configuration")]
    NotAbsorbing(usize),
    #[error("linear system with {states} unknowns exceeds the solver limit of {limit}")]
    SolveTooLarge { states: usize, limit: usize },
    #[error("linear solve residual {residual:e} exceeds tolerance")]
    Residual { residual: f64 },
    #[error("no strict plurality opinion")]
    NoStrictPlurality,
    #[error("sample at t = {t} arrived after t = {last}")]
    OutOfOrder { t: u64, last: u64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
