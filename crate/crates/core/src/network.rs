//! Gossip matrices, neighbor sampling and PULL rumor spreading.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::{self, ExecMode};
use crate::rng::{stream, StreamRole};

/// Row sums must equal 1 within this.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Hard cap on rumor-spreading rounds.
pub const MAX_ROUNDS: u64 = 1_000_000;

/// First property a candidate gossip matrix violates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GossipDiagnostic {
    Empty,
    NotSquare { row: usize, len: usize, expected: usize },
    NegativeEntry { row: usize, col: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
    /// Strongly connected components of the positive-entry graph.
    Reducible { components: Vec<Vec<usize>> },
}

impl std::fmt::Display for GossipDiagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GossipDiagnostic::Empty => write!(f, "gossip matrix has no rows"),
            GossipDiagnostic::NotSquare { row, len, expected } => {
                write!(f, "row {row} has {len} entries, expected {expected}")
            }
            GossipDiagnostic::NegativeEntry { row, col, value } => {
                write!(f, "entry ({row}, {col}) is negative: {value}")
            }
            GossipDiagnostic::RowSum { row, sum } => write!(f, "row {row} sums to {sum}, not 1"),
            GossipDiagnostic::Reducible { components } => {
                write!(f, "graph is not strongly connected; components {components:?}")
            }
        }
    }
}

/// Row-stochastic, irreducible `N x N` communication law.
#[derive(Debug, Clone, PartialEq)]
pub struct GossipMatrix {
    n: usize,
    // row-major
    probs: Vec<f64>,
}

impl GossipMatrix {
    /// Validate and wrap a dense matrix given as rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        validate(rows).map_err(|d| Error::InvalidConfig(format!("gossip matrix: {d}")))?;
        Ok(GossipMatrix {
            n: rows.len(),
            probs: rows.iter().flatten().copied().collect(),
        })
    }

    /// A single agent talking to nobody. Valid only as a degenerate case
    /// for rumor spreading.
    pub fn singleton() -> Self {
        GossipMatrix {
            n: 1,
            probs: vec![1.0],
        }
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}

/// `G(i, j) = 1/(N-1)` off the diagonal, 0 on it.
pub fn complete_graph(n: usize) -> Result<GossipMatrix> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("complete graph needs N >= 2, got {n}")));
    }
    let p = 1.0 / (n - 1) as f64;
    let probs = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { p }).collect();
    Ok(GossipMatrix { n, probs })
}

/// Check shape, nonnegativity, row sums and strong connectivity, in that
/// order, reporting the first failure.
pub fn validate(rows: &[Vec<f64>]) -> std::result::Result<(), GossipDiagnostic> {
    let n = rows.len();
    if n == 0 {
        return Err(GossipDiagnostic::Empty);
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(GossipDiagnostic::NotSquare {
                row: i,
                len: row.len(),
                expected: n,
            });
        }
    }
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(GossipDiagnostic::NegativeEntry { row: i, col: j, value: v });
            }
        }
    }
    for (i, row) in rows.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(GossipDiagnostic::RowSum { row: i, sum });
        }
    }
    let components = strongly_connected_components(rows);
    if components.len() > 1 {
        return Err(GossipDiagnostic::Reducible { components });
    }
    Ok(())
}

/// Kosaraju over the graph with an edge `i -> j` wherever `G(i, j) > 0`.
/// Components are sorted by smallest member, members ascending.
fn strongly_connected_components(rows: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = rows.len();
    let adj: Vec<Vec<usize>> = rows
        .iter()
        .map(|r| (0..n).filter(|&j| r[j] > 0.0).collect())
        .collect();
    let mut radj = vec![Vec::new(); n];
    for (i, out) in adj.iter().enumerate() {
        for &j in out {
            radj[j].push(i);
        }
    }

    // iterative post-order on the forward graph
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for s in 0..n {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![(s, 0usize)];
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if let Some(&w) = adj[v].get(*next) {
                *next += 1;
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }

    let mut comp = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for &s in order.iter().rev() {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![s];
        comp[s] = id;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &w in &radj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = id;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components.sort_by_key(|c| c[0]);
    components
}

/// Draw `j ~ G(i, .)` by inverting the row CDF at one uniform draw.
pub fn sample_neighbor<R: Rng + ?Sized>(g: &GossipMatrix, i: usize, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    inverse_cdf(g.row(i), u)
}

/// Smallest `j` with `u < sum_{l <= j} row[l]`, skipping zero-mass entries.
/// Falls back to the last positive entry if rounding leaves `u` beyond the
/// final partial sum.
pub fn inverse_cdf(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last_positive = j;
        if u < acc {
            return j;
        }
    }
    last_positive
}

/// Outcome of one PULL rumor-spreading run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpreadOutcome {
    /// Round by which every agent is informed.
    pub tau: u64,
    /// Round at which each agent first became informed; 0 for the source.
    pub informed_at: Vec<u64>,
}

/// PULL rumor spreading from `source`: each round, every uninformed agent
/// calls one neighbor drawn from its row and learns the rumor if that
/// neighbor knew it at the start of the round.
pub fn simulate_rumor_spread<R: Rng + ?Sized>(g: &GossipMatrix, source: usize, rng: &mut R) -> Result<SpreadOutcome> {
    let n = g.n_agents();
    if source >= n {
        return Err(Error::InvalidConfig(format!("source {source} out of range for N={n}")));
    }
    let mut informed = vec![false; n];
    let mut informed_at = vec![0u64; n];
    informed[source] = true;
    let mut remaining = n - 1;
    let mut round = 0u64;
    let mut newly = Vec::with_capacity(n);
    while remaining > 0 {
        round += 1;
        if round > MAX_ROUNDS {
            return Err(Error::Diagnostic(format!(
                "rumor did not reach all agents within {MAX_ROUNDS} rounds"
            )));
        }
        newly.clear();
        for i in 0..n {
            if !informed[i] && informed[sample_neighbor(g, i, rng)] {
                newly.push(i);
            }
        }
        for &i in &newly {
            informed[i] = true;
            informed_at[i] = round;
        }
        remaining -= newly.len();
    }
    Ok(SpreadOutcome {
        tau: round,
        informed_at,
    })
}

/// Monte Carlo estimate of `E[b^{2 tau_spr}]` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpreadMoment {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    /// Mean spreading time over the same trials.
    pub mean_tau: f64,
}

/// Estimate `E[b^{2 tau_spr}]` over `trials` runs from agent 0. One base
/// seed is drawn from `rng`; each trial then owns an independent stream,
/// so the result does not depend on how trials are scheduled.
pub fn estimate_spread_moment<R: Rng + ?Sized>(
    g: &GossipMatrix,
    b: f64,
    trials: usize,
    rng: &mut R,
    mode: ExecMode,
) -> Result<SpreadMoment> {
    if !(b > 1.0 && b.is_finite()) {
        return Err(Error::InvalidConfig(format!("b must be > 1, got {b}")));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    let base: u64 = rng.random();
    let taus = par::try_map_indexed(mode, trials, |t| {
        let mut r = stream(base, t as u64, 0, StreamRole::Trial);
        simulate_rumor_spread(g, 0, &mut r).map(|o| o.tau)
    })?;
    let mut values = Vec::with_capacity(trials);
    for &tau in &taus {
        let v = b.powf(2.0 * tau as f64);
        if !v.is_finite() {
            return Err(Error::Diagnostic(format!(
                "b^(2 tau) overflows for b={b}, tau={tau}"
            )));
        }
        values.push(v);
    }
    let nf = trials as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let std_error = if trials > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        (var / nf).sqrt()
    } else {
        0.0
    };
    Ok(SpreadMoment {
        mean,
        std_error,
        trials,
        mean_tau: taus.iter().sum::<u64>() as f64 / nf,
    })
}
