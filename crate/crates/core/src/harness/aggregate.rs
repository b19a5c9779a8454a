//! Mean regret curves with normal-approximation confidence bands.

use crate::error::{Error, Result};
use crate::policies::RunResult;

/// z-value of a two-sided 95% interval.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AggregateMode {
    /// One sample per seed: the agent-averaged curve.
    #[default]
    SeedMeans,
    /// One sample per (seed, agent) curve.
    Pooled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub mean: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub samples: usize,
}

impl Aggregate {
    pub fn horizon(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and standard error (sample sd over `sqrt(n)`).
pub fn mean_stderr(xs: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::InsufficientSamples(format!("need at least 2 samples, got {n}")));
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

/// Pointwise mean of cumulative regret with `mean +- 1.96 stderr`.
pub fn aggregate(results: &[RunResult], mode: AggregateMode) -> Result<Aggregate> {
    let curves: Vec<Vec<f64>> = match mode {
        AggregateMode::SeedMeans => results
            .iter()
            .map(|r| (1..=r.horizon()).map(|t| r.mean_regret_at(t)).collect())
            .collect(),
        AggregateMode::Pooled => results.iter().flat_map(|r| r.cum_regret.iter().cloned()).collect(),
    };
    aggregate_curves(&curves)
}

pub fn aggregate_curves(curves: &[Vec<f64>]) -> Result<Aggregate> {
    if curves.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "confidence band needs at least 2 curves, got {}",
            curves.len()
        )));
    }
    let horizon = curves[0].len();
    if let Some(c) = curves.iter().find(|c| c.len() != horizon) {
        return Err(Error::InvalidDimension(format!(
            "curves of length {} and {horizon} cannot be aggregated",
            c.len()
        )));
    }
    let mut agg = Aggregate {
        mean: Vec::with_capacity(horizon),
        ci_low: Vec::with_capacity(horizon),
        ci_high: Vec::with_capacity(horizon),
        samples: curves.len(),
    };
    let mut column = vec![0.0; curves.len()];
    for t in 0..horizon {
        for (x, c) in column.iter_mut().zip(curves) {
            *x = c[t];
        }
        let (mean, se) = mean_stderr(&column)?;
        agg.mean.push(mean);
        agg.ci_low.push(mean - Z95 * se);
        agg.ci_high.push(mean + Z95 * se);
    }
    Ok(agg)
}
