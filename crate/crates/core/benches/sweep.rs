//! Sequential vs parallel execution of the two batch workloads: a seed
//! sweep and Monte Carlo rumor spreading.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use subgoss::harness::{run_config, RunConfig};
use subgoss::network::{complete_graph, estimate_spread_moment};
use subgoss::par::ExecMode;
use subgoss::policies::Policy;
use subgoss::rng::{stream, StreamRole};

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn seed_sweep(c: &mut Criterion) {
    let cfg = RunConfig {
        d: 16,
        m: 2,
        k: 8,
        n: 4,
        t: 2000,
        policy: Policy::SubgossMulti,
        n_seeds: 16,
        ..RunConfig::default()
    };
    let mut group = c.benchmark_group("seed_sweep");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| run_config(&cfg, mode).unwrap())
        });
    }
    group.finish();
}

fn rumor_trials(c: &mut Criterion) {
    let g = complete_graph(64).unwrap();
    let mut group = c.benchmark_group("rumor_trials");
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| {
                let mut r = stream(0, 0, 0, StreamRole::Trial);
                estimate_spread_moment(&g, 1.2, 2000, &mut r, mode).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, seed_sweep, rumor_trials);
criterion_main!(benches);
