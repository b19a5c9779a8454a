//! Geometric phase schedule and per-phase explore budgets.

use serde::{Deserialize, Serialize};

use crate::bounds::ceil_pow;
use crate::error::{Error, Result};

/// How many explore plays each active subspace gets per phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExploreBudgetMode {
    /// `8 m ceil(b^{(j-1)/2})`, the constant the analysis needs.
    Theoretical,
    /// `m ceil(b^{(j-2)/2})`, the smaller constant used in practice.
    #[default]
    Experimental,
}

/// One phase, with inclusive 1-based time slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Phase {
    pub j: u64,
    pub start: u64,
    pub end: u64,
}

impl Phase {
    pub fn len(&self) -> u64 {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Length of phase `j`: `ceil(b^{j-1})`.
pub fn phase_length(b: f64, j: u64) -> u64 {
    ceil_pow(b, (j - 1) as f64) as u64
}

fn check(b: f64, j: u64) -> Result<()> {
    if !(b > 1.0 && b.is_finite()) {
        return Err(Error::InvalidConfig(format!("b must be > 1, got {b}")));
    }
    if j == 0 {
        return Err(Error::InvalidConfig("phases are numbered from 1".into()));
    }
    Ok(())
}

/// First and last slot of phase `j`.
pub fn phase_boundaries(b: f64, j: u64) -> Result<(u64, u64)> {
    check(b, j)?;
    let start = 1 + (1..j).map(|l| phase_length(b, l)).sum::<u64>();
    Ok((start, start + phase_length(b, j) - 1))
}

/// Explore plays per active subspace in phase `j`.
pub fn explore_budget(mode: ExploreBudgetMode, m: usize, b: f64, j: u64) -> u64 {
    let m = m as u64;
    match mode {
        ExploreBudgetMode::Theoretical => 8 * m * ceil_pow(b, (j as f64 - 1.0) / 2.0) as u64,
        ExploreBudgetMode::Experimental => m * ceil_pow(b, (j as f64 - 2.0) / 2.0) as u64,
    }
}

/// Phases covering slots `1..=horizon`; the last one may extend past it.
pub fn phases(b: f64, horizon: u64) -> Result<Vec<Phase>> {
    check(b, 1)?;
    let mut out = Vec::new();
    let mut start = 1u64;
    let mut j = 1u64;
    while start <= horizon {
        let len = phase_length(b, j);
        out.push(Phase {
            j,
            start,
            end: start + len - 1,
        });
        start += len;
        j += 1;
    }
    Ok(out)
}

/// Number of phases that end at or before `horizon`, i.e. the number of
/// gossip rounds a run of that length performs.
pub fn completed_phases(b: f64, horizon: u64) -> Result<u64> {
    Ok(phases(b, horizon)?.iter().filter(|p| p.end <= horizon).count() as u64)
}
