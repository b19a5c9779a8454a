//! Command-line front end: `run`, `bounds`, `spread`, `validate`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bounds::{single_agent_bound, tau0, theorem1_bound, BoundBreakdown, BoundInputs};
use crate::error::{Error, Result};
use crate::harness::csv_io::{write_aggregate, write_bounds, write_file, write_raw, write_summary};
use crate::harness::{aggregate, build_instance, mean_stderr, run_config, AggregateMode, DeltaSetting, RunConfig};
use crate::network::{complete_graph, estimate_spread_moment, GossipMatrix, SpreadMoment};
use crate::par::{self, ExecMode};
use crate::policies::{EventLevel, ExploreBudgetMode, Policy, RunResult};
use crate::rng::{stream, StreamRole};

/// Environment variable holding the worker-pool size.
pub const THREADS_ENV: &str = "SUBGOSS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "subgoss", version, about = "Gossiping subspace bandit simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate every seed and write regret CSVs.
    Run(RunArgs),
    /// Write theoretical bound curves.
    Bounds(BoundsArgs),
    /// Rumor-spread statistics for the configured gossip graph.
    Spread(SpreadArgs),
    /// Check a config without running it.
    Validate(Overrides),
}

/// Config file plus per-field overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML config; defaults are used for absent fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub policy: Option<Policy>,
    #[arg(long = "d")]
    pub d: Option<usize>,
    #[arg(long = "m")]
    pub m: Option<usize>,
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "T")]
    pub t: Option<u64>,
    #[arg(long = "b")]
    pub b: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fixed confidence level; switches `delta_mode` to fixed.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub noise_std: Option<f64>,
    #[arg(long)]
    pub s_bound: Option<f64>,
    #[arg(long)]
    pub n_extra_actions: Option<usize>,
    /// theoretical | experimental
    #[arg(long, value_parser = parse_budget_mode)]
    pub budget_mode: Option<ExploreBudgetMode>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_seeds: Option<usize>,
    #[arg(long)]
    pub true_index: Option<usize>,
    #[arg(long)]
    pub min_gap: Option<f64>,
    #[arg(long)]
    pub resample_actions: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also write per-agent per-step regret.
    #[arg(long)]
    pub raw: bool,
    /// none | phases | full
    #[arg(long, value_parser = parse_event_level)]
    pub events: Option<EventLevel>,
    /// Aggregate over (seed, agent) curves instead of seed means.
    #[arg(long)]
    pub pooled: bool,
    /// Run seeds one after another.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    /// Output CSV file.
    #[arg(long, default_value = "bounds.csv")]
    pub out: PathBuf,
    /// Horizon spacing of the rows.
    #[arg(long, default_value_t = 1)]
    pub step: u64,
    /// Gap to use; defaults to the gap of the seed-0 instance.
    #[arg(long)]
    pub gap: Option<f64>,
    /// `E[b^{2 tau_spr}]` to use instead of estimating it.
    #[arg(long)]
    pub spread_moment: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SpreadArgs {
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
}

fn parse_budget_mode(s: &str) -> std::result::Result<ExploreBudgetMode, String> {
    match s {
        "theoretical" => Ok(ExploreBudgetMode::Theoretical),
        "experimental" => Ok(ExploreBudgetMode::Experimental),
        _ => Err(format!("unknown budget mode {s:?}")),
    }
}

fn parse_event_level(s: &str) -> std::result::Result<EventLevel, String> {
    match s {
        "none" => Ok(EventLevel::None),
        "phases" => Ok(EventLevel::Phases),
        "full" => Ok(EventLevel::Full),
        _ => Err(format!("unknown event level {s:?}")),
    }
}

impl Overrides {
    /// Load the config (or defaults) and apply every given flag.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field { c.$target = v; })*
            };
        }
        set!(policy => policy, d => d, m => m, k => k, n => n, t => t, b => b, lambda => lambda,
             noise_std => noise_std, s_bound => s_bound, budget_mode => explore_budget_mode,
             seed => master_seed, n_seeds => n_seeds, true_index => true_index, min_gap => min_gap);
        if let Some(v) = self.delta {
            c.delta_mode = DeltaSetting::Fixed;
            c.delta = v;
        }
        if self.n_extra_actions.is_some() {
            c.n_extra_actions = self.n_extra_actions;
        }
        if self.resample_actions {
            c.resample_actions = true;
        }
        Ok(c)
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match init_pool().and_then(|()| dispatch(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                2
            } else {
                1
            }
        }
    }
}

fn init_pool() -> Result<()> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                par::init_workers(n);
                Ok(())
            }
            _ => Err(Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(()),
    }
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Spread(a) => cmd_spread(a),
        Command::Validate(o) => cmd_validate(o),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let mut config = a.overrides.resolve()?;
    if let Some(level) = a.events {
        config.events = level;
    }
    config.validate()?;
    let exec = if a.sequential { ExecMode::Sequential } else { ExecMode::Parallel };
    let runs = run_config(&config, exec)?;
    let results: Vec<RunResult> = runs.iter().map(|s| s.result.clone()).collect();
    create_dir(&a.out)?;

    write_file(&a.out.join("summary.csv"), |w| write_summary(&runs, w))?;
    let mode = if a.pooled { AggregateMode::Pooled } else { AggregateMode::SeedMeans };
    match aggregate(&results, mode) {
        Ok(agg) => write_file(&a.out.join("aggregate.csv"), |w| write_aggregate(&agg, w))?,
        Err(Error::InsufficientSamples(msg)) => eprintln!("note: aggregate.csv skipped: {msg}"),
        Err(e) => return Err(e),
    }
    if a.raw {
        write_file(&a.out.join("raw.csv"), |w| write_raw(&results, w))?;
    }
    if config.events != EventLevel::None {
        write_file(&a.out.join("events.jsonl"), |w| {
            for s in &runs {
                for e in &s.result.events {
                    let mut v = serde_json::to_value(e).map_err(std::io::Error::other)?;
                    v["seed"] = s.seed_index.into();
                    serde_json::to_writer(&mut *w, &v)?;
                    w.write_all(b"\n")?;
                }
            }
            Ok(())
        })?;
    }

    let finals: Vec<f64> = results.iter().map(RunResult::final_mean_regret).collect();
    let frozen = results.iter().filter(|r| r.freeze_phase.is_some()).count();
    print!("policy={} seeds={} T={} ", config.policy, results.len(), config.t);
    match mean_stderr(&finals) {
        Ok((mean, se)) => println!("final_mean_regret={mean:.6} ci95=+-{:.6}", 1.96 * se),
        Err(_) => println!("final_mean_regret={:.6}", finals[0]),
    }
    if matches!(config.policy, Policy::SubgossMulti | Policy::SubgossSingle) {
        println!("frozen={frozen}/{}", results.len());
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

/// Gossip matrix for `config.n` agents regardless of policy.
fn graph(config: &RunConfig) -> Result<Option<GossipMatrix>> {
    config.gossip_matrix()
}

fn spread_moment(config: &RunConfig, trials: usize) -> Result<Option<SpreadMoment>> {
    match graph(config)? {
        None => Ok(None),
        Some(g) => {
            let mut rng = stream(config.master_seed, 0, 0, StreamRole::Trial);
            estimate_spread_moment(&g, config.b, trials, &mut rng, ExecMode::Parallel).map(Some)
        }
    }
}

/// Bound rows at horizons `step, 2 step, ..` up to `T` (always including
/// `T`). With `delta_mode = one_over_T` each row uses `1/t`, so rows start
/// at `t = 2`.
pub fn bound_rows(config: &RunConfig, step: u64, gap: f64, spread: f64) -> Result<Vec<(u64, BoundBreakdown, f64)>> {
    if step == 0 {
        return Err(Error::InvalidConfig("step must be >= 1".into()));
    }
    let t0 = tau0(config.b, config.m, config.k, config.n)?.tau0;
    let mut ts: Vec<u64> = (1..=config.t / step).map(|i| i * step).collect();
    if ts.last() != Some(&config.t) {
        ts.push(config.t);
    }
    if config.delta_mode == DeltaSetting::OneOverT {
        ts.retain(|&t| t >= 2);
    }
    ts.into_iter()
        .map(|t| {
            let delta = match config.delta_mode {
                DeltaSetting::OneOverT => 1.0 / t as f64,
                DeltaSetting::Fixed => config.delta,
            };
            let inp = BoundInputs {
                t,
                d: config.d,
                m: config.m,
                k: config.k,
                n: config.n,
                b: config.b,
                lambda: config.lambda,
                delta,
                s: config.s_bound,
                gap,
                spread_moment: spread,
            };
            Ok((t, theorem1_bound(&inp, t0)?, single_agent_bound(&inp)?.total))
        })
        .collect()
}

fn cmd_bounds(a: &BoundsArgs) -> Result<()> {
    let config = a.overrides.resolve()?;
    config.validate()?;
    let gap = match a.gap {
        Some(g) => g,
        None => build_instance(&config, 0)?.1,
    };
    let spread = match a.spread_moment {
        Some(s) => s,
        None => spread_moment(&config, config.spread_trials)?.map_or(1.0, |s| s.mean),
    };
    let rows = bound_rows(&config, a.step, gap, spread)?;
    write_file(&a.out, |w| write_bounds(&rows, w))?;
    println!("gap={gap:.6} spread_moment={spread:.6} rows={}", rows.len());
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_spread(a: &SpreadArgs) -> Result<()> {
    let mut config = a.overrides.resolve()?;
    config.validate()?;
    if config.n < 2 {
        // a single agent has nothing to spread; show the complete graph on 2
        config.n = 2;
    }
    let g = match graph(&config)? {
        Some(g) => g,
        None => complete_graph(2)?,
    };
    let mut rng = stream(config.master_seed, 0, 0, StreamRole::Trial);
    let s = estimate_spread_moment(&g, config.b, a.trials, &mut rng, ExecMode::Parallel)?;
    println!("agents={} trials={} b={}", g.n_agents(), s.trials, config.b);
    println!("mean_tau={:.6}", s.mean_tau);
    println!("spread_moment={:.6} stderr={:.6}", s.mean, s.std_error);
    Ok(())
}

fn cmd_validate(o: &Overrides) -> Result<()> {
    let config = o.resolve()?;
    config.validate()?;
    graph(&config)?;
    println!(
        "ok: d={} m={} K={} N={} T={} policy={} seeds={}",
        config.d, config.m, config.k, config.n, config.t, config.policy, config.n_seeds
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply() {
        let cli = Cli::try_parse_from(["subgoss", "run", "--policy", "genie", "--T", "50", "--seed", "7", "--delta", "0.1"])
            .unwrap();
        let Command::Run(a) = cli.command else { panic!() };
        let c = a.overrides.resolve().unwrap();
        assert_eq!(c.policy, Policy::Genie);
        assert_eq!(c.t, 50);
        assert_eq!(c.master_seed, 7);
        assert_eq!(c.delta_mode, DeltaSetting::Fixed);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run_cli(["subgoss", "run", "--bogus"]), 2);
    }

    #[test]
    fn validate_divisibility() {
        assert_eq!(run_cli(["subgoss", "validate", "--K", "12", "--N", "5"]), 2);
        assert_eq!(run_cli(["subgoss", "validate"]), 0);
    }

    #[test]
    fn bound_rows_end_at_horizon() {
        let c = RunConfig {
            t: 1000,
            ..RunConfig::default()
        };
        let rows = bound_rows(&c, 300, 0.1, 4.0).unwrap();
        let ts: Vec<u64> = rows.iter().map(|r| r.0).collect();
        assert_eq!(ts, vec![300, 600, 900, 1000]);
    }
}
