//! Seed sweeps: one instance per seed index, one policy run per instance.

use crate::environment::{compute_gap, generate_instance, ProblemInstance};
use crate::error::{Error, Result};
use crate::network::GossipMatrix;
use crate::par::{self, ExecMode};
use crate::policies::{run_policy, run_subgoss, Policy, RunResult, Streams};
use crate::rng::{stream, StreamRole};

use super::config::RunConfig;

const MAX_INSTANCE_DRAWS: usize = 100;

pub struct SeedRun {
    pub seed_index: u64,
    pub instance: ProblemInstance,
    /// Gap of the instance; infinite when `K = 1`.
    pub gap: f64,
    pub result: RunResult,
}

/// Instance for `seed_index`. It depends only on the master seed, the seed
/// index and the instance parameters, so every policy sees the same one.
pub fn build_instance(config: &RunConfig, seed_index: u64) -> Result<(ProblemInstance, f64)> {
    let mut rng = stream(config.master_seed, seed_index, 0, StreamRole::Instance);
    let params = config.instance_params();
    for _ in 0..MAX_INSTANCE_DRAWS {
        let inst = generate_instance(&params, &mut rng)?;
        match compute_gap(&inst) {
            Ok(g) if g.delta >= config.min_gap => return Ok((inst, g.delta)),
            Ok(_) | Err(Error::DegenerateInstance(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::GenerationFailure(format!(
        "no instance with gap >= {} after {MAX_INSTANCE_DRAWS} draws",
        config.min_gap
    )))
}

/// Run the configured policy on one seed.
pub fn run_seed(config: &RunConfig, gossip: Option<&GossipMatrix>, seed_index: u64, exec: ExecMode) -> Result<SeedRun> {
    let (instance, gap) = build_instance(config, seed_index)?;
    let params = config.sim_params(exec);
    let streams = Streams {
        master_seed: config.master_seed,
        seed_index,
    };
    let result = match (config.policy, gossip) {
        (Policy::SubgossMulti, None) => run_subgoss(&instance, None, 1, &params, streams, Policy::SubgossMulti)?,
        (p, g) => run_policy(p, &instance, g, &params, streams)?,
    };
    Ok(SeedRun {
        seed_index,
        instance,
        gap,
        result,
    })
}

/// Validate `config` and run seeds `0..n_seeds`. In parallel mode the
/// seeds are spread over the pool and each run is sequential inside.
pub fn run_config(config: &RunConfig, exec: ExecMode) -> Result<Vec<SeedRun>> {
    config.validate()?;
    let gossip = match config.policy {
        Policy::SubgossMulti => config.gossip_matrix()?,
        _ => None,
    };
    par::try_map_indexed(exec, config.n_seeds, |i| {
        run_seed(config, gossip.as_ref(), i as u64, ExecMode::Sequential)
            .map_err(|e| e.context(format!("seed {i}, policy {}", config.policy)))
    })
}
