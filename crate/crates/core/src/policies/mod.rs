//! Agent policies: the gossiping subspace learner, its single-agent
//! variant, the genie that knows the right subspace, and ambient OFUL.

pub mod agent;
pub mod events;
pub mod runner;
pub mod schedule;
pub mod view;

pub use agent::{
    end_explore_update, explore_plan, exploit_step, gossip_exchange, init_agents, update_active_set, AgentState,
    Estimate, ExploitParams, Recommendation, SetUpdate,
};
pub use events::{detect_freeze, Event, EventKind, EventLevel, PhaseRecord};
pub use runner::{
    run_genie, run_oful, run_policy, run_single_agent_subgoss, run_subgoss, run_subgoss_multi, DeltaMode, Policy,
    RunResult, SimParams, Streams,
};
pub use schedule::{explore_budget, phase_boundaries, ExploreBudgetMode, Phase};
pub use view::ActionView;
