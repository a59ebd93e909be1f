//! Experiment parameters and initial-configuration builders.

use serde::{Deserialize, Serialize};
use usd_core::{Configuration, StepMode, ThresholdParams};

use crate::error::{HarnessError, Result};

/// How the initial opinion counts are chosen. Opinion 1 (index 0) is the
/// plurality in every biased regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitKind {
    /// `⌊(n − u0)/k⌋` each, remainder to the lowest indices.
    Uniform,
    /// Opinion 1 leads every other opinion by `beta`; `None` selects
    /// `⌈2√n·ln n⌉`.
    Additive { beta: Option<u64> },
    /// Opinion 1 holds about `ratio` times the support of every other.
    Multiplicative { ratio: f64 },
    /// Counts given verbatim; they must sum to `n − u0`.
    Explicit { counts: Vec<u64> },
}

impl InitKind {
    pub fn name(&self) -> &'static str {
        match self {
            InitKind::Uniform => "uniform",
            InitKind::Additive { .. } => "additive",
            InitKind::Multiplicative { .. } => "multiplicative",
            InitKind::Explicit { .. } => "explicit",
        }
    }
}

/// `⌈2√n·ln n⌉`.
pub fn default_beta(n: u64) -> u64 {
    let n = n as f64;
    if n <= 1.0 {
        return 0;
    }
    (2.0 * n.sqrt() * n.ln()).ceil() as u64
}

/// `⌈40·k·n·ln n⌉`.
pub fn default_cap(n: u64, k: usize) -> u64 {
    let n = n as f64;
    (40.0 * k as f64 * n * n.ln().max(1.0)).ceil() as u64
}

/// Parameters of one batch of independent trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub n: u64,
    pub k: usize,
    pub init: InitKind,
    pub u0: u64,
    pub alpha: f64,
    pub trials: u64,
    pub master_seed: u64,
    /// Interaction cap per trial; `None` uses [`default_cap`].
    pub cap: Option<u64>,
    /// `None` picks [`StepMode::default_for`].
    pub mode: Option<StepMode>,
    /// Trace cadence; `None` uses `max(1, ⌊n/10⌋)`.
    pub sample_every: Option<u64>,
    /// Check the undecided envelopes after every productive interaction
    /// rather than at the trace cadence.
    pub audit: bool,
    /// Reject starts with `u0 > (n − x_1)/2`.
    pub enforce_hypothesis: bool,
}

impl ExperimentSpec {
    pub fn new(n: u64, k: usize) -> Self {
        ExperimentSpec {
            n,
            k,
            init: InitKind::Uniform,
            u0: 0,
            alpha: 1.0,
            trials: 1,
            master_seed: 0,
            cap: None,
            mode: None,
            sample_every: None,
            audit: false,
            enforce_hypothesis: false,
        }
    }

    pub fn cap(&self) -> u64 {
        self.cap.unwrap_or_else(|| default_cap(self.n, self.k))
    }

    pub fn mode(&self) -> StepMode {
        self.mode.unwrap_or_else(|| StepMode::default_for(self.n))
    }

    pub fn sample_every(&self) -> u64 {
        self.sample_every.unwrap_or((self.n / 10).max(1))
    }

    pub fn threshold_params(&self) -> Result<ThresholdParams> {
        Ok(ThresholdParams::with_alpha(self.alpha)?)
    }

    /// The additive bias actually used, for additive starts.
    pub fn beta(&self) -> Option<u64> {
        match self.init {
            InitKind::Additive { beta } => Some(beta.unwrap_or_else(|| default_beta(self.n))),
            _ => None,
        }
    }

    pub fn ratio(&self) -> Option<f64> {
        match self.init {
            InitKind::Multiplicative { ratio } => Some(ratio),
            _ => None,
        }
    }

    /// Non-fatal notes about the parameters.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let limit = opinion_limit(self.n);
        if self.k as f64 > limit {
            out.push(format!(
                "k = {} exceeds √n/ln²n = {:.3}; the convergence guarantees assume fewer opinions",
                self.k, limit
            ));
        }
        out
    }
}

/// `√n / ln² n`, the opinion count above which the harness warns.
pub fn opinion_limit(n: u64) -> f64 {
    let n = n as f64;
    if n <= 1.0 {
        return 0.0;
    }
    n.sqrt() / (n.ln() * n.ln())
}

/// Builds the start configuration described by `spec`.
pub fn make_initial(spec: &ExperimentSpec) -> Result<Configuration> {
    let infeasible = |why: String| HarnessError::Infeasible(why);
    if spec.k < 2 {
        return Err(infeasible(format!("k = {} but at least 2 opinions are needed", spec.k)));
    }
    if spec.u0 > spec.n {
        return Err(infeasible(format!("u0 = {} exceeds n = {}", spec.u0, spec.n)));
    }
    let decided = spec.n - spec.u0;
    let k = spec.k as u64;
    let counts = match &spec.init {
        InitKind::Uniform => {
            let (base, rem) = (decided / k, decided % k);
            (0..k).map(|i| base + u64::from(i < rem)).collect()
        }
        InitKind::Additive { .. } => {
            let beta = spec.beta().unwrap_or_default();
            if beta > decided {
                return Err(infeasible(format!(
                    "beta = {beta} exceeds the {decided} decided agents"
                )));
            }
            lead_with_rest(decided, k, (decided - beta) / k)
        }
        InitKind::Multiplicative { ratio } => {
            if !(ratio.is_finite() && *ratio >= 1.0) {
                return Err(infeasible(format!("ratio = {ratio} must be a finite number ≥ 1")));
            }
            let x = (decided as f64 / (ratio + (k - 1) as f64)).floor() as u64;
            if x == 0 {
                return Err(infeasible(format!(
                    "ratio {ratio} leaves no agents for the other opinions"
                )));
            }
            lead_with_rest(decided, k, x)
        }
        InitKind::Explicit { counts } => {
            if counts.len() != spec.k {
                return Err(infeasible(format!("{} counts given for k = {}", counts.len(), spec.k)));
            }
            if counts.iter().sum::<u64>() != decided {
                return Err(infeasible(format!(
                    "counts sum to {} but n − u0 = {decided}",
                    counts.iter().sum::<u64>()
                )));
            }
            counts.clone()
        }
    };
    let c = Configuration::new(counts, spec.u0)?;
    if spec.enforce_hypothesis && 2 * spec.u0 > spec.n - c.counts()[0] {
        return Err(infeasible(format!(
            "u0 = {} exceeds (n − x_1)/2 = {}",
            spec.u0,
            (spec.n - c.counts()[0]) as f64 / 2.0
        )));
    }
    Ok(c)
}

/// `x` for opinions 2..k and the remainder for opinion 1.
fn lead_with_rest(decided: u64, k: u64, x: u64) -> Vec<u64> {
    let mut counts = vec![x; k as usize];
    counts[0] = decided - (k - 1) * x;
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: u64, k: usize, init: InitKind) -> ExperimentSpec {
        ExperimentSpec {
            init,
            ..ExperimentSpec::new(n, k)
        }
    }

    #[test]
    fn uniform_split() {
        assert_eq!(
            make_initial(&spec(12, 3, InitKind::Uniform)).unwrap().counts(),
            [4, 4, 4]
        );
        let mut s = spec(14, 3, InitKind::Uniform);
        s.u0 = 1;
        let c = make_initial(&s).unwrap();
        assert_eq!((c.counts(), c.undecided()), (&[5, 4, 4][..], 1));
    }

    #[test]
    fn additive_split() {
        let c = make_initial(&spec(10_000, 2, InitKind::Additive { beta: Some(100) })).unwrap();
        assert_eq!(c.counts(), [5050, 4950]);
        let c = make_initial(&spec(100_000, 4, InitKind::Additive { beta: None })).unwrap();
        let beta = default_beta(100_000);
        assert_eq!(beta, 7282);
        assert!(c.counts()[0] - c.counts()[1] >= beta);
        assert!(c.counts()[0] - c.counts()[1] < beta + 4);
    }

    #[test]
    fn multiplicative_split() {
        let c = make_initial(&spec(9, 2, InitKind::Multiplicative { ratio: 2.0 })).unwrap();
        assert_eq!(c.counts(), [6, 3]);
        let c = make_initial(&spec(100_000, 16, InitKind::Multiplicative { ratio: 2.0 })).unwrap();
        assert_eq!(c.counts()[1], 5882);
        assert!(c.counts()[0] >= 2 * 5882);
    }

    #[test]
    fn infeasible_parameters_are_rejected() {
        assert!(make_initial(&spec(10, 2, InitKind::Additive { beta: Some(11) })).is_err());
        assert!(make_initial(&spec(3, 2, InitKind::Multiplicative { ratio: 5.0 })).is_err());
        assert!(make_initial(&spec(3, 2, InitKind::Multiplicative { ratio: 0.5 })).is_err());
        assert!(make_initial(&spec(5, 2, InitKind::Explicit { counts: vec![2, 2] })).is_err());
        assert!(make_initial(&spec(5, 1, InitKind::Uniform)).is_err());
        let mut s = spec(10, 2, InitKind::Explicit { counts: vec![4, 2] });
        s.u0 = 4;
        assert!(make_initial(&s).is_ok());
        s.enforce_hypothesis = true;
        assert!(make_initial(&s).is_err());
    }

    #[test]
    fn warning_above_opinion_limit() {
        assert!(ExperimentSpec::new(10_000, 8).warnings().len() == 1);
        assert!(ExperimentSpec::new(100_000_000, 2).warnings().is_empty());
    }
}
