//! Log–log least-squares fits of convergence time against a predictor.

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    K,
    N,
    NLogN,
    KNLogN,
}

impl Predictor {
    /// Predictor value; logarithms are natural.
    pub fn value(self, n: u64, k: usize) -> f64 {
        let n = n as f64;
        match self {
            Predictor::K => k as f64,
            Predictor::N => n,
            Predictor::NLogN => n * n.ln(),
            Predictor::KNLogN => k as f64 * n * n.ln(),
        }
    }
}

/// One aggregated cell: mean interactions at `(n, k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: u64,
    pub k: usize,
    pub mean_interactions: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub predictor: Predictor,
    /// Exponent estimate.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits `ln y = slope·ln x + intercept`. A constant response has `R² = 1`.
pub fn fit_scaling(points: &[ScalingPoint], predictor: Predictor) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(HarnessError::Fit(format!("{} rows, at least 3 needed", points.len())));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for p in points {
        let x = predictor.value(p.n, p.k);
        if !(x > 0.0 && p.mean_interactions > 0.0) {
            return Err(HarnessError::Fit("non-positive value in log space".into()));
        }
        xs.push(x.ln());
        ys.push(p.mean_interactions.ln());
    }
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 1e-12 * len {
        return Err(HarnessError::Fit("predictor does not vary".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy <= f64::EPSILON * len {
        1.0
    } else {
        1.0 - residual / syy
    };
    Ok(ScalingFit {
        predictor,
        slope,
        intercept,
        r_squared,
    })
}
