//! Per-agent state and the phase-level operations of the algorithm:
//! explore planning, estimate refresh, optimistic exploitation,
//! recommendation pulls and active-set updates.

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use crate::bounds;
use crate::environment::{argmax_first, SubspaceCollection};
use crate::error::{Error, Result};
use crate::linalg::{explore_estimate_min_norm, ExploreStats, LinUcbStats};
use crate::network::{sample_neighbor, GossipMatrix};

use super::view::ActionView;

/// Latest explore-based estimate of `P_k theta*`.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub theta: DVector<f64>,
    pub norm: f64,
    /// Phase in which it was computed.
    pub phase: u64,
}

/// Everything one agent owns.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: usize,
    /// Subspaces this agent never drops.
    pub sticky: Vec<usize>,
    /// Subspaces played this phase, ascending.
    pub active: Vec<usize>,
    /// Cap on `active.len()`: `K/N + 2`.
    pub capacity: usize,
    /// Explore statistics for every subspace, indexed by id.
    pub explore: Vec<ExploreStats>,
    /// Projected LinUCB statistics for every subspace, indexed by id.
    pub linucb: Vec<LinUcbStats>,
    pub estimates: Vec<Option<Estimate>>,
    /// Subspace with the largest estimate norm this phase.
    pub best: Option<usize>,
    /// Current phase, starting at 1.
    pub phase: u64,
}

impl AgentState {
    pub fn n_subspaces(&self) -> usize {
        self.explore.len()
    }

    /// Sticky set inside the active set, active set within capacity and
    /// sorted without duplicates.
    pub fn check_invariants(&self) -> Result<()> {
        if self.active.len() > self.capacity {
            return Err(Error::InvariantViolation(format!(
                "agent {}: active set {:?} exceeds capacity {}",
                self.id, self.active, self.capacity
            )));
        }
        if !self.active.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvariantViolation(format!(
                "agent {}: active set {:?} is not strictly ascending",
                self.id, self.active
            )));
        }
        if let Some(k) = self.sticky.iter().find(|k| !self.active.contains(k)) {
            return Err(Error::InvariantViolation(format!(
                "agent {}: sticky subspace {k} missing from active set {:?}",
                self.id, self.active
            )));
        }
        Ok(())
    }
}

/// Partition `K` subspaces into `N` contiguous sticky blocks of `K/N`;
/// agent `i` (0-based) gets `i K/N .. (i+1) K/N`.
pub fn init_agents(k: usize, n: usize, m: usize, lambda: f64) -> Result<Vec<AgentState>> {
    if n == 0 || k == 0 || k % n != 0 {
        return Err(Error::InvalidConfig(format!(
            "K must be a positive multiple of N, got K={k}, N={n}"
        )));
    }
    let per = k / n;
    (0..n)
        .map(|i| {
            let sticky: Vec<usize> = (i * per..(i + 1) * per).collect();
            Ok(AgentState {
                id: i,
                active: sticky.clone(),
                sticky,
                capacity: per + 2,
                explore: (0..k).map(|_| ExploreStats::new(m)).collect(),
                linucb: (0..k).map(|_| LinUcbStats::new(m, lambda)).collect::<Result<_>>()?,
                estimates: vec![None; k],
                best: None,
                phase: 1,
            })
        })
        .collect()
}

/// Explore slots of the current phase as `(subspace, basis column)`.
///
/// Subspaces take turns in active-set order; each subspace cycles through
/// its basis columns continuing from its lifetime play count. The plan has
/// `min(phase_len, |active| * budget)` entries, so a short phase is spent
/// entirely on exploration, spread as evenly as possible.
pub fn explore_plan(state: &AgentState, budget: u64, phase_len: u64) -> Result<Vec<(usize, usize)>> {
    if state.active.is_empty() {
        return Err(Error::InvariantViolation(format!("agent {}: empty active set", state.id)));
    }
    let a = state.active.len() as u64;
    let total = phase_len.min(a * budget);
    let mut next: Vec<u64> = state.active.iter().map(|&k| state.explore[k].total_count()).collect();
    let mut plan = Vec::with_capacity(total as usize);
    for s in 0..total {
        let slot = (s % a) as usize;
        let k = state.active[slot];
        let m = state.explore[k].dim_sub() as u64;
        plan.push((k, (next[slot] % m) as usize));
        next[slot] += 1;
    }
    Ok(plan)
}

/// Refresh estimates for every active subspace from all explore samples so
/// far and pick the best one (largest norm, lowest id on ties).
///
/// A subspace whose columns have not all been explored yet (possible in the
/// first, very short phases) gets the minimum-norm least-squares estimate.
pub fn end_explore_update(state: &mut AgentState, subspaces: &SubspaceCollection) -> Result<usize> {
    if state.active.is_empty() {
        return Err(Error::InvariantViolation(format!("agent {}: empty active set", state.id)));
    }
    for &k in &state.active {
        let stats = state.explore.get(k).ok_or_else(|| {
            Error::InvariantViolation(format!("agent {}: no explore statistics for subspace {k}", state.id))
        })?;
        let theta = explore_estimate_min_norm(stats, subspaces.basis(k))?;
        let norm = theta.norm();
        state.estimates[k] = Some(Estimate {
            theta,
            norm,
            phase: state.phase,
        });
    }
    let best = best_by_norm(state, &state.active)?;
    state.best = Some(best);
    Ok(best)
}

/// Largest current-phase estimate norm among `candidates` (ascending ids).
fn best_by_norm(state: &AgentState, candidates: &[usize]) -> Result<usize> {
    let norms = candidates
        .iter()
        .map(|&k| match &state.estimates[k] {
            Some(e) if e.phase == state.phase => Ok(e.norm),
            _ => Err(Error::InvariantViolation(format!(
                "agent {}: no phase-{} estimate for subspace {k}",
                state.id, state.phase
            ))),
        })
        .collect::<Result<Vec<f64>>>()?;
    let (pos, _) = argmax_first(norms).ok_or_else(|| {
        Error::InvariantViolation(format!("agent {}: no candidates to rank", state.id))
    })?;
    Ok(candidates[pos])
}

/// Confidence level settings for exploitation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExploitParams {
    pub delta: f64,
    pub s_bound: f64,
}

/// Optimistic action on subspace `k`: argmax over the action set of the
/// projected UCB score, lowest index on ties.
pub fn linucb_choice(stats: &LinUcbStats, coords: &[f64], params: ExploitParams) -> Result<usize> {
    let p = stats.dim();
    let beta = bounds::beta(params.delta, p, stats.lambda(), stats.count(), params.s_bound)?;
    let scorer = stats.scorer()?;
    let scores = coords.chunks_exact(p).map(|z| scorer.score(z, beta));
    argmax_first(scores)
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidInstance("action set is empty".into()))
}

/// Projected LinUCB step on this phase's best subspace. Records nothing.
pub fn exploit_step(state: &AgentState, view: &ActionView<'_>, params: ExploitParams) -> Result<usize> {
    let k = state.best.ok_or_else(|| {
        Error::InvariantViolation(format!("agent {}: exploiting before any estimate", state.id))
    })?;
    linucb_choice(&state.linucb[k], view.coords(k), params)
}

/// One subspace ID pulled from a neighbor at the end of a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Recommendation {
    pub from_agent: usize,
    pub to_agent: usize,
    pub subspace_id: usize,
    pub phase: u64,
}

impl Recommendation {
    /// Bits needed to send a subspace ID out of `k`, plus one.
    pub fn payload_bits(k: usize) -> u32 {
        (k.max(1) as u64).next_power_of_two().trailing_zeros() + 1
    }
}

/// Every agent `i` draws `J ~ G(i, .)` from its own stream and receives
/// `J`'s current best subspace. Recommenders are not modified.
pub fn gossip_exchange<R: Rng>(
    states: &[AgentState],
    g: &GossipMatrix,
    rngs: &mut [R],
) -> Result<Vec<Recommendation>> {
    if g.n_agents() != states.len() || rngs.len() != states.len() {
        return Err(Error::InvalidConfig(format!(
            "gossip matrix is {0}x{0} but there are {1} agents and {2} streams",
            g.n_agents(),
            states.len(),
            rngs.len()
        )));
    }
    states
        .iter()
        .zip(rngs.iter_mut())
        .map(|(s, rng)| {
            let j = sample_neighbor(g, s.id, rng);
            let from = &states[j];
            let subspace_id = from.best.ok_or_else(|| {
                Error::Protocol(format!("agent {j} has no recommendation in phase {}", from.phase))
            })?;
            Ok(Recommendation {
                from_agent: j,
                to_agent: s.id,
                subspace_id,
                phase: from.phase,
            })
        })
        .collect()
}

/// Which branch of the active-set update fired.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "case")]
pub enum SetUpdate {
    /// Recommendation already active.
    Unchanged,
    /// Room left: recommendation added.
    Added,
    /// Full: kept sticky, the best non-sticky member and the recommendation.
    Replaced { kept: usize, dropped: Vec<usize> },
}

pub fn update_active_set(state: &mut AgentState, rec: &Recommendation) -> Result<SetUpdate> {
    let k = state.n_subspaces();
    if rec.subspace_id >= k {
        return Err(Error::Protocol(format!(
            "recommended subspace {} out of range for K={k}",
            rec.subspace_id
        )));
    }
    if rec.to_agent != state.id || rec.phase != state.phase {
        return Err(Error::Protocol(format!(
            "recommendation for agent {} phase {} delivered to agent {} in phase {}",
            rec.to_agent, rec.phase, state.id, state.phase
        )));
    }
    let outcome = if state.active.contains(&rec.subspace_id) {
        SetUpdate::Unchanged
    } else if state.active.len() < state.capacity {
        state.active.push(rec.subspace_id);
        state.active.sort_unstable();
        SetUpdate::Added
    } else {
        let non_sticky: Vec<usize> = state
            .active
            .iter()
            .copied()
            .filter(|k| !state.sticky.contains(k))
            .collect();
        if non_sticky.is_empty() {
            return Err(Error::InvariantViolation(format!(
                "agent {}: full active set {:?} has no non-sticky member",
                state.id, state.active
            )));
        }
        let kept = best_by_norm(state, &non_sticky)?;
        let dropped = non_sticky.into_iter().filter(|&k| k != kept).collect();
        let mut next = state.sticky.clone();
        next.push(kept);
        next.push(rec.subspace_id);
        next.sort_unstable();
        state.active = next;
        SetUpdate::Replaced { kept, dropped }
    };
    state.check_invariants()?;
    Ok(outcome)
}
