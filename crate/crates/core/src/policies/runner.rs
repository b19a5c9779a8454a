//! End-to-end runs of every policy on one instance.

use std::ops::Deref;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::environment::{noise, ProblemInstance};
use crate::error::{Error, Result};
use crate::linalg::LinUcbStats;
use crate::network::GossipMatrix;
use crate::par::{self, ExecMode};
use crate::rng::{stream, SimRng, StreamRole};

use super::agent::{
    end_explore_update, explore_plan, exploit_step, gossip_exchange, init_agents, linucb_choice,
    update_active_set, AgentState, ExploitParams,
};
use super::events::{detect_freeze, AgentPhase, Event, EventKind, EventLevel, PhaseRecord};
use super::schedule::{explore_budget, phases, ExploreBudgetMode, Phase};
use super::view::ActionView;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    SubgossMulti,
    SubgossSingle,
    Oful,
    Genie,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::SubgossMulti => "subgoss_multi",
            Policy::SubgossSingle => "subgoss_single",
            Policy::Oful => "oful",
            Policy::Genie => "genie",
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subgoss_multi" => Ok(Policy::SubgossMulti),
            "subgoss_single" => Ok(Policy::SubgossSingle),
            "oful" => Ok(Policy::Oful),
            "genie" => Ok(Policy::Genie),
            other => Err(Error::InvalidConfig(format!(
                "unknown policy {other:?}; expected subgoss_multi, subgoss_single, oful or genie"
            ))),
        }
    }
}

/// Confidence level for the UCB radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaMode {
    /// `delta = 1/T`.
    OneOverT,
    Fixed(f64),
}

/// Knobs shared by every policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub horizon: u64,
    pub b: f64,
    pub lambda: f64,
    pub delta: DeltaMode,
    pub budget_mode: ExploreBudgetMode,
    /// Redraw the random actions at every slot.
    pub resample_actions: bool,
    pub events: EventLevel,
    /// Record the first slot at which `theta*` leaves the confidence
    /// ellipsoid (genie and OFUL only).
    pub track_coverage: bool,
    /// How agents within a run are stepped.
    pub exec: ExecMode,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            horizon: 1000,
            b: 2.0,
            lambda: 1.0,
            delta: DeltaMode::OneOverT,
            budget_mode: ExploreBudgetMode::Experimental,
            resample_actions: false,
            events: EventLevel::None,
            track_coverage: false,
            exec: ExecMode::Sequential,
        }
    }
}

impl SimParams {
    pub fn delta(&self) -> f64 {
        match self.delta {
            DeltaMode::OneOverT => 1.0 / self.horizon as f64,
            DeltaMode::Fixed(d) => d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("T must be >= 1".into()));
        }
        if !(self.b > 1.0 && self.b.is_finite()) {
            return Err(Error::InvalidConfig(format!("b must be > 1, got {}", self.b)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be > 0, got {}", self.lambda)));
        }
        let d = self.delta();
        if !(d > 0.0 && d <= 1.0) {
            return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {d}")));
        }
        Ok(())
    }
}

/// Coordinates of the random streams used by a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    pub master_seed: u64,
    pub seed_index: u64,
}

impl Streams {
    pub fn open(&self, agent: u64, role: StreamRole) -> SimRng {
        stream(self.master_seed, self.seed_index, agent, role)
    }
}

/// Output of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub policy: Policy,
    pub seed_index: u64,
    pub master_seed: u64,
    /// Per agent, `w_t` for `t = 1..=T`.
    pub inst_regret: Vec<Vec<f64>>,
    /// Per agent, running sum of `inst_regret`.
    pub cum_regret: Vec<Vec<f64>>,
    pub phases: Vec<PhaseRecord>,
    pub events: Vec<Event>,
    pub freeze_phase: Option<u64>,
    /// Gossip pulls made by each agent.
    pub communications: u64,
    /// First slot at which `theta*` was outside the confidence set, if
    /// coverage was tracked and it ever was.
    pub coverage_violation: Option<u64>,
}

impl RunResult {
    pub fn n_agents(&self) -> usize {
        self.cum_regret.len()
    }

    pub fn horizon(&self) -> usize {
        self.cum_regret.first().map_or(0, Vec::len)
    }

    /// Agent-averaged cumulative regret at slot `t` (1-based).
    pub fn mean_regret_at(&self, t: usize) -> f64 {
        self.cum_regret.iter().map(|c| c[t - 1]).sum::<f64>() / self.n_agents() as f64
    }

    pub fn final_mean_regret(&self) -> f64 {
        self.mean_regret_at(self.horizon())
    }
}

fn cumulative(inst: &[f64]) -> Vec<f64> {
    inst.iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(*acc)
        })
        .collect()
}

enum ViewRef<'a, 'b> {
    Shared(&'b ActionView<'a>),
    Owned(ActionView<'a>),
}

impl<'a> Deref for ViewRef<'a, '_> {
    type Target = ActionView<'a>;

    fn deref(&self) -> &ActionView<'a> {
        match self {
            ViewRef::Shared(v) => v,
            ViewRef::Owned(v) => v,
        }
    }
}

struct Env<'a> {
    instance: &'a ProblemInstance,
    fixed: Option<ActionView<'a>>,
    streams: Streams,
    params: SimParams,
    exploit: ExploitParams,
}

impl<'a> Env<'a> {
    fn new(instance: &'a ProblemInstance, params: SimParams, streams: Streams) -> Result<Self> {
        params.validate()?;
        Ok(Env {
            instance,
            fixed: (!params.resample_actions).then(|| ActionView::fixed(instance)),
            streams,
            params,
            exploit: ExploitParams {
                delta: params.delta(),
                s_bound: instance.s_bound(),
            },
        })
    }

    /// Action set at slot `t`. Resampled sets come from a stream keyed by
    /// `t`, so every agent sees the same set.
    fn view(&self, t: u64) -> ViewRef<'a, '_> {
        match &self.fixed {
            Some(v) => ViewRef::Shared(v),
            None => ViewRef::Owned(ActionView::resampled(
                self.instance,
                &mut self.streams.open(t, StreamRole::Actions),
            )),
        }
    }

    fn full(&self) -> bool {
        self.params.events == EventLevel::Full
    }

    fn phases(&self) -> bool {
        self.params.events != EventLevel::None
    }
}

struct AgentRun {
    noise: SimRng,
    inst: Vec<f64>,
    events: Vec<Event>,
    record: Option<AgentPhase>,
}

fn play_phase(state: &mut AgentState, run: &mut AgentRun, env: &Env<'_>, phase: Phase, budget: u64) -> Result<()> {
    let horizon = env.params.horizon;
    let inst = env.instance;
    let std = inst.noise_std();
    let m = inst.m();
    let plan = explore_plan(state, budget, phase.len())?;
    let mut rec = AgentPhase {
        active: state.active.clone(),
        explore_slots: 0,
        exploit_slots: 0,
        best: None,
        received: None,
    };
    let mut t = phase.start;
    for &(k, c) in &plan {
        if t > horizon {
            break;
        }
        let idx = inst.basis_action_index(k, c);
        let view = env.view(t);
        let r = view.mean(idx) + noise(std, &mut run.noise);
        state.explore[k].record(c, r)?;
        run.inst[(t - 1) as usize] = view.regret(idx);
        if env.full() {
            run.events.push(Event {
                t,
                agent: state.id,
                phase: phase.j,
                kind: EventKind::ExplorePlay {
                    subspace: k,
                    column: c,
                    action: idx,
                    reward: r,
                },
            });
        }
        rec.explore_slots += 1;
        t += 1;
    }
    if rec.explore_slots == plan.len() as u64 {
        let best = end_explore_update(state, inst.subspaces())?;
        rec.best = Some(best);
        if env.phases() {
            for &k in &state.active {
                let e = state.estimates[k].as_ref().expect("refreshed above");
                run.events.push(Event {
                    t: t - 1,
                    agent: state.id,
                    phase: phase.j,
                    kind: EventKind::Estimate {
                        subspace: k,
                        norm: e.norm,
                        samples: state.explore[k].total_count(),
                    },
                });
            }
        }
        let end = phase.end.min(horizon);
        while t <= end {
            let view = env.view(t);
            let idx = exploit_step(state, &view, env.exploit)?;
            let z = &view.coords(best)[idx * m..(idx + 1) * m];
            let r = view.mean(idx) + noise(std, &mut run.noise);
            state.linucb[best].record_coords(z, r)?;
            run.inst[(t - 1) as usize] = view.regret(idx);
            if env.full() {
                run.events.push(Event {
                    t,
                    agent: state.id,
                    phase: phase.j,
                    kind: EventKind::ExploitPlay {
                        subspace: Some(best),
                        action: idx,
                        reward: r,
                    },
                });
            }
            rec.exploit_slots += 1;
            t += 1;
        }
    }
    run.record = Some(rec);
    Ok(())
}

/// SubGoss with one agent per sticky block. `gossip` must be `N x N`; a
/// single agent may pass `None` and then never communicates.
pub fn run_subgoss(
    instance: &ProblemInstance,
    gossip: Option<&GossipMatrix>,
    n_agents: usize,
    params: &SimParams,
    streams: Streams,
    policy: Policy,
) -> Result<RunResult> {
    let env = Env::new(instance, *params, streams)?;
    if n_agents > 1 {
        match gossip {
            Some(g) if g.n_agents() == n_agents => {}
            Some(g) => {
                return Err(Error::InvalidConfig(format!(
                    "gossip matrix has {} agents, run has {n_agents}",
                    g.n_agents()
                )))
            }
            None => return Err(Error::InvalidConfig("multi-agent run needs a gossip matrix".into())),
        }
    }
    let horizon = params.horizon;
    let mut states = init_agents(instance.k(), n_agents, instance.m(), params.lambda)?;
    let mut runs: Vec<AgentRun> = (0..n_agents)
        .map(|i| AgentRun {
            noise: streams.open(i as u64, StreamRole::Noise),
            inst: vec![0.0; horizon as usize],
            events: Vec::new(),
            record: None,
        })
        .collect();
    let mut gossip_rngs: Vec<SimRng> = (0..n_agents).map(|i| streams.open(i as u64, StreamRole::Gossip)).collect();
    let mut records = Vec::new();
    let mut communications = 0u64;

    for phase in phases(params.b, horizon)? {
        let budget = explore_budget(params.budget_mode, instance.m(), params.b, phase.j);
        {
            let mut pairs: Vec<(&mut AgentState, &mut AgentRun)> = states.iter_mut().zip(runs.iter_mut()).collect();
            par::try_for_each_mut(params.exec, &mut pairs, |_, (s, r)| play_phase(s, r, &env, phase, budget))?;
        }
        let complete = phase.end <= horizon;
        let mut agents: Vec<AgentPhase> = runs.iter_mut().map(|r| r.record.take().expect("phase played")).collect();

        if complete && n_agents > 1 {
            let g = gossip.expect("checked above");
            let recs = gossip_exchange(&states, g, &mut gossip_rngs)?;
            communications += 1;
            for (rec, (state, run)) in recs.iter().zip(states.iter_mut().zip(runs.iter_mut())) {
                let update = update_active_set(state, rec)?;
                agents[state.id].received = Some(rec.subspace_id);
                if env.phases() {
                    run.events.push(Event {
                        t: phase.end,
                        agent: state.id,
                        phase: phase.j,
                        kind: EventKind::Recommendation {
                            from_agent: rec.from_agent,
                            subspace: rec.subspace_id,
                        },
                    });
                    run.events.push(Event {
                        t: phase.end,
                        agent: state.id,
                        phase: phase.j,
                        kind: EventKind::SetUpdate {
                            update,
                            active: state.active.clone(),
                        },
                    });
                }
            }
        }
        for s in &mut states {
            s.check_invariants()?;
            s.phase += 1;
        }
        records.push(PhaseRecord {
            j: phase.j,
            start: phase.start,
            end: phase.end.min(horizon),
            complete,
            explore_budget: budget,
            agents,
        });
    }

    let freeze_phase = detect_freeze(&records, instance.true_index());
    let mut events: Vec<Event> = runs.iter_mut().flat_map(|r| std::mem::take(&mut r.events)).collect();
    if env.phases() {
        if let Some(j) = freeze_phase {
            let p = &records[(j - 1) as usize];
            events.extend((0..n_agents).map(|agent| Event {
                t: p.end,
                agent,
                phase: j,
                kind: EventKind::FreezeDetected,
            }));
        }
    }
    events.sort_by_key(|e| (e.t, e.agent));
    let inst_regret: Vec<Vec<f64>> = runs.into_iter().map(|r| r.inst).collect();
    Ok(RunResult {
        policy,
        seed_index: streams.seed_index,
        master_seed: streams.master_seed,
        cum_regret: inst_regret.iter().map(|w| cumulative(w)).collect(),
        inst_regret,
        phases: records,
        events,
        freeze_phase,
        communications,
        coverage_violation: None,
    })
}

/// Multi-agent SubGoss over the given gossip graph.
pub fn run_subgoss_multi(
    instance: &ProblemInstance,
    gossip: &GossipMatrix,
    params: &SimParams,
    streams: Streams,
) -> Result<RunResult> {
    run_subgoss(instance, Some(gossip), gossip.n_agents(), params, streams, Policy::SubgossMulti)
}

/// One agent searching all `K` subspaces with no communication.
pub fn run_single_agent_subgoss(instance: &ProblemInstance, params: &SimParams, streams: Streams) -> Result<RunResult> {
    run_subgoss(instance, None, 1, params, streams, Policy::SubgossSingle)
}

/// Plain LinUCB loop on fixed coordinates: the true subspace for the genie,
/// raw ambient actions for OFUL.
fn run_linucb(instance: &ProblemInstance, params: &SimParams, streams: Streams, subspace: Option<usize>) -> Result<RunResult> {
    let env = Env::new(instance, *params, streams)?;
    let horizon = params.horizon;
    let (p, theta_coords, policy) = match subspace {
        Some(k) => (
            instance.m(),
            instance.subspaces().basis(k).coords(instance.theta_star())?,
            Policy::Genie,
        ),
        None => (instance.d(), instance.theta_star().clone(), Policy::Oful),
    };
    let mut stats = LinUcbStats::new(p, params.lambda)?;
    let mut rng = streams.open(0, StreamRole::Noise);
    let mut inst = vec![0.0; horizon as usize];
    let mut events = Vec::new();
    let mut coverage_violation = None;
    let std = instance.noise_std();
    for t in 1..=horizon {
        if params.track_coverage && coverage_violation.is_none() && !covered(&stats, &theta_coords, &env)? {
            coverage_violation = Some(t);
        }
        let view = env.view(t);
        let coords = match subspace {
            Some(k) => view.coords(k),
            None => view.raw(),
        };
        let idx = linucb_choice(&stats, coords, env.exploit)?;
        let r = view.mean(idx) + noise(std, &mut rng);
        stats.record_coords(&coords[idx * p..(idx + 1) * p], r)?;
        inst[(t - 1) as usize] = view.regret(idx);
        if env.full() {
            events.push(Event {
                t,
                agent: 0,
                phase: 0,
                kind: EventKind::ExploitPlay {
                    subspace,
                    action: idx,
                    reward: r,
                },
            });
        }
    }
    Ok(RunResult {
        policy,
        seed_index: streams.seed_index,
        master_seed: streams.master_seed,
        cum_regret: vec![cumulative(&inst)],
        inst_regret: vec![inst],
        phases: Vec::new(),
        events,
        freeze_phase: None,
        communications: 0,
        coverage_violation,
    })
}

/// `||theta_hat - theta*||_V <= beta` for the current statistics.
fn covered(stats: &LinUcbStats, theta_coords: &DVector<f64>, env: &Env<'_>) -> Result<bool> {
    let beta = crate::bounds::beta(
        env.exploit.delta,
        stats.dim(),
        stats.lambda(),
        stats.count(),
        env.exploit.s_bound,
    )?;
    Ok(stats.ellipsoid_distance(theta_coords)? <= beta)
}

/// Projected LinUCB on the true subspace from the first slot.
pub fn run_genie(instance: &ProblemInstance, params: &SimParams, streams: Streams) -> Result<RunResult> {
    run_linucb(instance, params, streams, Some(instance.true_index()))
}

/// Ambient-dimension LinUCB that ignores the subspaces.
pub fn run_oful(instance: &ProblemInstance, params: &SimParams, streams: Streams) -> Result<RunResult> {
    run_linucb(instance, params, streams, None)
}

/// Dispatch on `policy`. `gossip` is only used by the multi-agent policy.
pub fn run_policy(
    policy: Policy,
    instance: &ProblemInstance,
    gossip: Option<&GossipMatrix>,
    params: &SimParams,
    streams: Streams,
) -> Result<RunResult> {
    match policy {
        Policy::SubgossMulti => {
            let g = gossip.ok_or_else(|| Error::InvalidConfig("multi-agent run needs a gossip matrix".into()))?;
            run_subgoss_multi(instance, g, params, streams)
        }
        Policy::SubgossSingle => run_single_agent_subgoss(instance, params, streams),
        Policy::Oful => run_oful(instance, params, streams),
        Policy::Genie => run_genie(instance, params, streams),
    }
}
