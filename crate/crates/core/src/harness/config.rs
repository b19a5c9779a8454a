//! Run configuration, read from a flat TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::environment::InstanceParams;
use crate::error::{Error, Result};
use crate::network::{complete_graph, GossipMatrix};
use crate::par::ExecMode;
use crate::policies::{DeltaMode, EventLevel, ExploreBudgetMode, Policy, SimParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DeltaSetting {
    #[default]
    #[serde(rename = "one_over_T", alias = "one_over_t")]
    OneOverT,
    #[serde(rename = "fixed")]
    Fixed,
}

/// Communication graph.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum GossipSpec {
    /// Uniform over the other agents.
    #[default]
    Complete,
    /// Dense row-major matrix.
    Matrix { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub d: usize,
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: u64,
    pub b: f64,
    pub lambda: f64,
    pub delta_mode: DeltaSetting,
    /// Used when `delta_mode = "fixed"`.
    pub delta: f64,
    pub noise_std: f64,
    pub s_bound: f64,
    /// Random actions besides the basis columns; `5 d` when absent.
    pub n_extra_actions: Option<usize>,
    pub explore_budget_mode: ExploreBudgetMode,
    pub policy: Policy,
    pub n_seeds: usize,
    pub master_seed: u64,
    pub true_index: usize,
    pub resample_actions: bool,
    /// Regenerate instances whose gap falls below this.
    pub min_gap: f64,
    pub events: EventLevel,
    pub gossip: GossipSpec,
    /// Trials for the spread-moment estimate used by bound curves.
    pub spread_trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            d: 24,
            m: 2,
            k: 12,
            n: 4,
            t: 20_000,
            b: 2.0,
            lambda: 1.0,
            delta_mode: DeltaSetting::OneOverT,
            delta: 0.05,
            noise_std: 1.0,
            s_bound: 1.0,
            n_extra_actions: None,
            explore_budget_mode: ExploreBudgetMode::Experimental,
            policy: Policy::SubgossMulti,
            n_seeds: 30,
            master_seed: 0,
            true_index: 0,
            resample_actions: false,
            min_gap: 0.0,
            events: EventLevel::None,
            gossip: GossipSpec::Complete,
            spread_trials: 2000,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Agents actually simulated by the configured policy.
    pub fn agents(&self) -> usize {
        match self.policy {
            Policy::SubgossMulti => self.n,
            _ => 1,
        }
    }

    pub fn n_random_actions(&self) -> usize {
        self.n_extra_actions.unwrap_or(5 * self.d)
    }

    pub fn delta_mode(&self) -> DeltaMode {
        match self.delta_mode {
            DeltaSetting::OneOverT => DeltaMode::OneOverT,
            DeltaSetting::Fixed => DeltaMode::Fixed(self.delta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m == 0 || self.m >= self.d {
            return bad(format!("need 1 <= m < d, got d={}, m={}", self.d, self.m));
        }
        if self.k == 0 {
            return bad("K must be >= 1".into());
        }
        if self.true_index >= self.k {
            return bad(format!("true_index {} out of range for K={}", self.true_index, self.k));
        }
        if self.policy == Policy::SubgossMulti {
            if self.n == 0 {
                return bad("N must be >= 1".into());
            }
            if self.k % self.n != 0 {
                return bad(format!("K={} is not divisible by N={}", self.k, self.n));
            }
        }
        if self.n_seeds == 0 {
            return bad("n_seeds must be >= 1".into());
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if !(self.s_bound > 0.0 && self.s_bound.is_finite()) {
            return bad(format!("s_bound must be > 0, got {}", self.s_bound));
        }
        if !(self.min_gap >= 0.0) {
            return bad(format!("min_gap must be >= 0, got {}", self.min_gap));
        }
        if self.delta_mode == DeltaSetting::Fixed && !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        self.sim_params(ExecMode::Sequential).validate()?;
        if self.policy == Policy::SubgossMulti {
            self.gossip_matrix()?;
        }
        Ok(())
    }

    pub fn instance_params(&self) -> InstanceParams {
        InstanceParams {
            d: self.d,
            m: self.m,
            k: self.k,
            true_index: self.true_index,
            n_actions: self.n_random_actions(),
            noise_std: self.noise_std,
            s_bound: self.s_bound,
        }
    }

    pub fn sim_params(&self, exec: ExecMode) -> SimParams {
        SimParams {
            horizon: self.t,
            b: self.b,
            lambda: self.lambda,
            delta: self.delta_mode(),
            budget_mode: self.explore_budget_mode,
            resample_actions: self.resample_actions,
            events: self.events,
            track_coverage: false,
            exec,
        }
    }

    /// The `N x N` gossip matrix, or `None` for a single agent.
    pub fn gossip_matrix(&self) -> Result<Option<GossipMatrix>> {
        if self.n <= 1 {
            return Ok(None);
        }
        let g = match &self.gossip {
            GossipSpec::Complete => complete_graph(self.n)?,
            GossipSpec::Matrix { rows } => {
                if rows.len() != self.n {
                    return Err(Error::InvalidConfig(format!(
                        "gossip matrix has {} rows, N={}",
                        rows.len(),
                        self.n
                    )));
                }
                GossipMatrix::from_rows(rows)?
            }
        };
        Ok(Some(g))
    }
}
