//! Event log and per-phase summaries, plus freeze detection.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::agent::SetUpdate;

/// How much of a run to log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventLevel {
    #[default]
    None,
    /// Estimates, recommendations, set updates, freeze.
    Phases,
    /// Everything, including every play.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum EventKind {
    ExplorePlay {
        subspace: usize,
        column: usize,
        action: usize,
        reward: f64,
    },
    ExploitPlay {
        /// `None` for ambient-dimension play.
        #[serde(skip_serializing_if = "Option::is_none")]
        subspace: Option<usize>,
        action: usize,
        reward: f64,
    },
    Estimate {
        subspace: usize,
        norm: f64,
        samples: u64,
    },
    Recommendation {
        from_agent: usize,
        subspace: usize,
    },
    SetUpdate {
        update: SetUpdate,
        active: Vec<usize>,
    },
    FreezeDetected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: u64,
    pub agent: usize,
    pub phase: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Write events as one JSON object per line.
pub fn write_jsonl<W: Write>(events: &[Event], mut out: W) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// What one agent did in one phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentPhase {
    /// Active set the phase was played with.
    pub active: Vec<usize>,
    pub explore_slots: u64,
    pub exploit_slots: u64,
    /// Best subspace by estimate norm; `None` if the horizon cut the
    /// explore part short.
    pub best: Option<usize>,
    /// Recommendation received at the end of the phase.
    pub received: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRecord {
    pub j: u64,
    pub start: u64,
    /// Last slot actually played (clipped to the horizon).
    pub end: u64,
    /// Whether the phase ran to its natural end.
    pub complete: bool,
    pub explore_budget: u64,
    pub agents: Vec<AgentPhase>,
}

/// Earliest phase from which every agent's best subspace is `true_index` in
/// every later phase that produced estimates. `None` if the last such
/// phase is not all-correct, or no phase produced estimates.
pub fn detect_freeze(phases: &[PhaseRecord], true_index: usize) -> Option<u64> {
    let all_true = |p: &PhaseRecord| p.agents.iter().all(|a| a.best == Some(true_index));
    let with_estimates: Vec<&PhaseRecord> = phases
        .iter()
        .filter(|p| p.agents.iter().all(|a| a.best.is_some()))
        .collect();
    let mut freeze = None;
    for p in with_estimates.iter().rev() {
        if all_true(p) {
            freeze = Some(p.j);
        } else {
            break;
        }
    }
    freeze
}

/// Recompute each agent's explore/exploit split from the phase records and
/// check it covers every played slot.
pub fn check_time_conservation(phases: &[PhaseRecord]) -> Result<()> {
    for p in phases {
        let len = p.end - p.start + 1;
        for (i, a) in p.agents.iter().enumerate() {
            if a.explore_slots + a.exploit_slots != len {
                return Err(Error::InvariantViolation(format!(
                    "phase {} agent {i}: {} explore + {} exploit != {len} slots",
                    p.j, a.explore_slots, a.exploit_slots
                )));
            }
        }
    }
    Ok(())
}
