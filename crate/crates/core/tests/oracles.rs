mod common;

use std::collections::HashMap;
use std::process::Command;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde_json::Value;

use common::*;
use subgoss::bounds::{
    beta, collaboration_ratio, lemma2_tail_count, lemma2_tail_phase, lemma3_tail, projected_linucb_bound,
    single_agent_bound, tau0, theorem1_bound, BoundInputs,
};
use subgoss::environment::{compute_gap, generate_instance, noise, optimal_action, InstanceParams};
use subgoss::harness::csv_io::{parse_aggregate, parse_raw, write_aggregate, write_raw};
use subgoss::harness::{aggregate, run_config, run_seed, Aggregate, AggregateMode, RunConfig};
use subgoss::linalg::{
    explore_estimate, explore_estimate_min_norm, project, random_orthonormal_basis, subspace_overlap, ucb_score,
    Basis, ExploreStats, LinUcbStats,
};
use subgoss::network::{complete_graph, estimate_spread_moment, inverse_cdf, sample_neighbor, GossipMatrix};
use subgoss::par::ExecMode;
use subgoss::policies::{
    explore_budget, schedule::phases, EventKind, EventLevel, ExploreBudgetMode, Policy, RunResult,
};
use subgoss::rng::SimRng;

fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

fn fixture() -> Value {
    let text = include_str!("fixtures/bounds_fixture.json");
    serde_json::from_str(text).unwrap()
}

fn gauss(rng: &mut SimRng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_vec(d: usize, rng: &mut SimRng) -> DVector<f64> {
    DVector::from_fn(d, |_, _| gauss(rng))
}

#[test]
fn bound_evaluators_match_high_precision_fixture() {
    let fx = fixture();
    let rel = 1e-12;
    assert_close(beta(0.01, 2, 1.0, 100, 1.0).unwrap(), fx["beta_001_m2_l1_n100"].as_f64().unwrap(), rel, "beta");
    assert_close(
        projected_linucb_bound(10_000, 2, 1.0, 1e-4, 1.0).unwrap(),
        fx["projected_T10000_m2_l1_d1e-4"].as_f64().unwrap(),
        rel,
        "projected",
    );
    for case in fx["theorem1"].as_array().unwrap() {
        let u = |k: &str| case[k].as_u64().unwrap();
        let f = |k: &str| case[k].as_f64().unwrap();
        let inp = BoundInputs {
            t: u("t"),
            d: u("d") as usize,
            m: u("m") as usize,
            k: u("k") as usize,
            n: u("n") as usize,
            b: f("b"),
            lambda: f("lambda"),
            delta: f("delta"),
            s: f("s"),
            gap: f("gap"),
            spread_moment: f("spread_moment"),
        };
        let name = case["name"].as_str().unwrap();
        let t0 = tau0(inp.b, inp.m, inp.k, inp.n).unwrap().tau0;
        assert_eq!(t0, u("tau0"), "{name}: tau0");
        let br = theorem1_bound(&inp, t0).unwrap();
        assert_close(br.projected_linucb, f("projected_linucb"), rel, name);
        assert_close(br.constant, f("constant"), rel, name);
        assert_close(br.exploration, f("exploration"), rel, name);
        assert_close(br.total, f("total"), rel, name);
        assert_close(single_agent_bound(&inp).unwrap().total, f("single_total"), rel, name);
    }
    for case in fx["tau0"].as_array().unwrap() {
        let t = tau0(
            case["b"].as_f64().unwrap(),
            case["m"].as_u64().unwrap() as usize,
            case["k"].as_u64().unwrap() as usize,
            case["n"].as_u64().unwrap() as usize,
        )
        .unwrap();
        assert_eq!(t.tau0, case["tau0"].as_u64().unwrap(), "{case}");
    }
    let r = &fx["ratio_T20000_d24_m2"];
    let cr = collaboration_ratio(20_000, 24, 2, 2.0, 1.0, 0.4, 1.0).unwrap();
    assert_close(cr.r_single, r["r_single"].as_f64().unwrap(), rel, "r_S");
    assert_close(cr.r_multi, r["r_multi"].as_f64().unwrap(), rel, "r_M");
    assert_close(lemma2_tail_count(0.5, 2, 64), fx["lemma2_count_e05_m2_n64"].as_f64().unwrap(), rel, "lemma2");
    assert_close(lemma2_tail_phase(0.3, 2, 2.0, 9), fx["lemma2_phase_e03_m2_b2_j9"].as_f64().unwrap(), rel, "lemma2 phase");
    assert_close(lemma3_tail(0.4, 2, 2.0, 9), fx["lemma3_g04_m2_b2_j9"].as_f64().unwrap(), rel, "lemma3");
}

#[test]
fn collaboration_ratio_at_equal_split_matches_single_agent_bound() {
    let cr = collaboration_ratio(20_000, 24, 2, 2.0, 1.0, 0.4, 1.0).unwrap();
    let inp = BoundInputs {
        t: 20_000,
        d: 24,
        m: 2,
        k: 12,
        n: 12,
        b: 2.0,
        lambda: 1.0,
        delta: 1.0 / 20_000.0,
        s: 1.0,
        gap: 0.4,
        spread_moment: 1.0,
    };
    assert_close(cr.r_single, single_agent_bound(&inp).unwrap().total, 1e-12, "r_S");
    assert_close(cr.ratio, cr.r_single / cr.r_multi, 1e-15, "ratio");
}

#[test]
fn bounds_cli_last_row_matches_fixture() {
    let fx = fixture();
    let case = &fx["theorem1"][0];
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_subgoss"))
        .args(["bounds", "--T", "20000", "--step", "5000", "--gap", "0.4", "--spread-moment", "6.5", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let last = text.lines().last().unwrap();
    let fields: Vec<&str> = last.split(',').collect();
    assert_eq!(fields[0], "20000");
    assert_close(fields[4].parse().unwrap(), case["total"].as_f64().unwrap(), 1e-12, "total");
    assert_close(fields[5].parse().unwrap(), case["single_total"].as_f64().unwrap(), 1e-12, "single");
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn explore_estimate_matches_pseudo_inverse() {
    let mut r = rng(3);
    for trial in 0..50 {
        let basis = random_orthonormal_basis(4, 2, &mut r).unwrap();
        let theta = random_vec(4, &mut r);
        let mut stats = ExploreStats::new(2);
        let mut plays = Vec::new();
        let n = 2 + trial % 7;
        for _ in 0..n {
            let c = stats.next_column();
            let y = basis.column(c).dot(&theta) + gauss(&mut r);
            stats.record(c, y).unwrap();
            plays.push((c, y));
        }
        let want = explore_oracle(basis.columns(), &plays);
        let got = explore_estimate(&stats, &basis).unwrap();
        assert!((got - want).norm() < 1e-9);
    }
}

#[test]
fn min_norm_estimate_matches_pseudo_inverse_when_columns_missing() {
    let mut r = rng(4);
    let basis = random_orthonormal_basis(6, 3, &mut r).unwrap();
    let mut stats = ExploreStats::new(3);
    stats.record(0, 0.7).unwrap();
    stats.record(0, 0.1).unwrap();
    stats.record(2, -0.4).unwrap();
    let want = explore_oracle(basis.columns(), &[(0, 0.7), (0, 0.1), (2, -0.4)]);
    let got = explore_estimate_min_norm(&stats, &basis).unwrap();
    assert!((got - want).norm() < 1e-9);
}

#[test]
fn ridge_matches_dense_projected_least_squares() {
    let mut r = rng(5);
    for _ in 0..20 {
        let basis = random_orthonormal_basis(6, 2, &mut r).unwrap();
        let mut stats = LinUcbStats::new(2, 1.0).unwrap();
        let (mut acts, mut rews) = (Vec::new(), Vec::new());
        for _ in 0..10 {
            let a = random_vec(6, &mut r);
            let y = gauss(&mut r);
            stats.record_coords(basis.coords(&a).unwrap().as_slice(), y).unwrap();
            acts.push(a);
            rews.push(y);
        }
        let (want, _) = dense_ridge(basis.columns(), &acts, &rews, 1.0);
        let got = basis.lift(&stats.ridge_estimate().unwrap()).unwrap();
        assert!((got - want).norm() < 1e-9);
    }
}

#[test]
fn ucb_score_matches_ellipse_maximisation() {
    let mut r = rng(6);
    let basis = random_orthonormal_basis(5, 2, &mut r).unwrap();
    let mut stats = LinUcbStats::new(2, 1.0).unwrap();
    for _ in 0..3 {
        let a = random_vec(5, &mut r);
        stats.record_coords(basis.coords(&a).unwrap().as_slice(), gauss(&mut r)).unwrap();
    }
    let center = stats.ridge_estimate().unwrap();
    let beta = 1.7;
    for _ in 0..5 {
        let a = random_vec(5, &mut r);
        let z = basis.coords(&a).unwrap();
        let want = ellipse_max(&center, stats.gram(), &z, beta);
        let got = ucb_score(&stats, &basis, &a, beta).unwrap();
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn subspace_argmax_matches_dense_formulation() {
    let mut r = rng(7);
    for _ in 0..50 {
        let d = r.random_range(3..9);
        let m = r.random_range(1..d.min(4));
        let basis = random_orthonormal_basis(d, m, &mut r).unwrap();
        let mut stats = LinUcbStats::new(m, 1.0).unwrap();
        let (mut acts, mut rews) = (Vec::new(), Vec::new());
        for _ in 0..r.random_range(0..12) {
            let a = random_vec(d, &mut r);
            let y = gauss(&mut r);
            stats.record_coords(basis.coords(&a).unwrap().as_slice(), y).unwrap();
            acts.push(a);
            rews.push(y);
        }
        let (theta, v_pinv) = dense_ridge(basis.columns(), &acts, &rews, 1.0);
        let p = basis.columns() * basis.columns().transpose();
        let candidates: Vec<DVector<f64>> = (0..20).map(|_| random_vec(d, &mut r)).collect();
        let beta = 1.3;
        let ours: Vec<f64> = candidates.iter().map(|a| ucb_score(&stats, &basis, a, beta).unwrap()).collect();
        let dense: Vec<f64> = candidates.iter().map(|a| dense_ucb(&theta, &v_pinv, &p, a, beta)).collect();
        let argmax = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        assert_eq!(argmax(&ours), argmax(&dense));
        for (x, y) in ours.iter().zip(&dense) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn projection_matches_dense_projector() {
    let mut r = rng(7);
    let basis = random_orthonormal_basis(10, 3, &mut r).unwrap();
    let x = random_vec(10, &mut r);
    let want = basis.columns() * basis.columns().transpose() * &x;
    assert!((project(&basis, &x).unwrap() - want).norm() < 1e-12);

    let cfg = RunConfig::default();
    let (inst, _) = subgoss::harness::build_instance(&cfg, 3).unwrap();
    for b in inst.subspaces().bases() {
        let want = b.columns() * b.columns().transpose() * inst.theta_star();
        assert!((project(b, inst.theta_star()).unwrap() - want).norm() < 1e-12);
    }
}

#[test]
fn pairwise_overlaps_match_direct_svd() {
    for seed in 1..=100 {
        let mut r = rng(seed);
        let a = random_orthonormal_basis(24, 2, &mut r).unwrap();
        let b = random_orthonormal_basis(24, 2, &mut r).unwrap();
        let cross = a.columns().transpose() * b.columns();
        let want = (&cross * cross.transpose()).symmetric_eigenvalues().max().max(0.0).sqrt();
        let got = subspace_overlap(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!(got < 1.0);
    }
}

#[test]
fn gap_matches_explicit_projections() {
    let p = InstanceParams {
        d: 6,
        m: 2,
        k: 3,
        true_index: 0,
        n_actions: 30,
        noise_std: 1.0,
        s_bound: 1.0,
    };
    let inst = generate_instance(&p, &mut rng(11)).unwrap();
    let gap = compute_gap(&inst).unwrap();
    let th = inst.theta_star();
    let proj = |k: usize| {
        let u = inst.subspaces().basis(k).columns();
        u * u.transpose() * th
    };
    let want = (1..3).map(|k| (proj(0) - proj(k)).norm()).fold(f64::INFINITY, f64::min);
    assert!(gap.delta > 0.0);
    assert!((gap.delta - want).abs() < 1e-12);
}

#[test]
fn optimal_action_matches_rescan() {
    let p = InstanceParams {
        d: 24,
        m: 2,
        k: 12,
        true_index: 4,
        n_actions: 96,
        noise_std: 1.0,
        s_bound: 1.0,
    };
    let inst = generate_instance(&p, &mut rng(12)).unwrap();
    assert_eq!(inst.n_actions(), 120);
    let (idx, val) = optimal_action(&inst).unwrap();
    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..inst.n_actions() {
        let v = inst.actions().column(i).dot(inst.theta_star());
        if v > best.1 {
            best = (i, v);
        }
    }
    assert_eq!(idx, best.0);
    assert_eq!(val, best.1);
    for i in 0..inst.n_actions() {
        assert!(val - inst.actions().column(i).dot(inst.theta_star()) <= 2.0 * inst.s_bound());
    }
}

#[test]
fn reward_noise_mean_within_clt_band() {
    let mut r = rng(13);
    let n = 100_000;
    let mean = (0..n).map(|_| noise(1.0, &mut r)).sum::<f64>() / n as f64;
    assert!(mean.abs() < 3.0 / (n as f64).sqrt());
}

#[test]
fn partner_draws_follow_inverse_cdf() {
    let g = complete_graph(4).unwrap();
    let mut a = rng(14);
    let mut b = a.clone();
    for i in 0..2000 {
        let row = i % 4;
        let got = sample_neighbor(&g, row, &mut a);
        let u: f64 = b.random();
        let mut acc = 0.0;
        let mut want = 3;
        for j in 0..4 {
            acc += g.get(row, j);
            if g.get(row, j) > 0.0 && u < acc {
                want = j;
                break;
            }
        }
        assert_eq!(got, want);
    }
    assert_eq!(inverse_cdf(&[0.0, 0.5, 0.0, 0.5], 0.0), 1);
}

#[test]
fn neighbor_frequencies_within_three_sigma() {
    let g = complete_graph(4).unwrap();
    let mut r = rng(15);
    let n = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[sample_neighbor(&g, 0, &mut r)] += 1;
    }
    assert_eq!(counts[0], 0);
    let p = 1.0 / 3.0;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    for &c in &counts[1..] {
        assert!((c as f64 / n as f64 - p).abs() < 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn spread_moment_matches_markov_chain_on_a_ring() {
    // lazy ring with a chord, irreducible and not symmetric
    let rows = vec![
        vec![0.2, 0.4, 0.0, 0.0, 0.4],
        vec![0.5, 0.0, 0.5, 0.0, 0.0],
        vec![0.0, 0.3, 0.0, 0.7, 0.0],
        vec![0.25, 0.0, 0.25, 0.0, 0.5],
        vec![0.5, 0.0, 0.0, 0.5, 0.0],
    ];
    let g = GossipMatrix::from_rows(&rows).unwrap();
    let b = 1.2;
    let (want, want_tau) = rumor_dp_moment(&rows, 0, b);
    let est = estimate_spread_moment(&g, b, 20_000, &mut rng(16), ExecMode::Parallel).unwrap();
    assert!((est.mean - want).abs() < 3.0 * est.std_error, "{} vs {want}", est.mean);
    assert!((est.mean_tau - want_tau).abs() < 0.1);
}

fn small_config(policy: Policy) -> RunConfig {
    RunConfig {
        d: 8,
        m: 2,
        k: 4,
        n: 2,
        t: 600,
        n_seeds: 4,
        policy,
        events: EventLevel::Full,
        ..RunConfig::default()
    }
}

#[test]
fn logged_estimates_replay_from_logged_rewards() {
    let cfg = small_config(Policy::SubgossMulti);
    let run = run_seed(&cfg, cfg.gossip_matrix().unwrap().as_ref(), 1, ExecMode::Sequential).unwrap();
    let inst = &run.instance;
    // (agent, subspace) -> per-column (sum, count)
    let mut acc: HashMap<(usize, usize), Vec<(f64, u64)>> = HashMap::new();
    let mut checked = 0;
    for e in &run.result.events {
        match &e.kind {
            EventKind::ExplorePlay { subspace, column, reward, action } => {
                assert_eq!(*action, inst.basis_action_index(*subspace, *column));
                let cols = acc.entry((e.agent, *subspace)).or_insert_with(|| vec![(0.0, 0); cfg.m]);
                cols[*column].0 += reward;
                cols[*column].1 += 1;
            }
            EventKind::Estimate { subspace, norm, samples } => {
                // a subspace squeezed out of a short phase has no samples yet
                let cols = acc.entry((e.agent, *subspace)).or_insert_with(|| vec![(0.0, 0); cfg.m]);
                let u = inst.subspaces().basis(*subspace).columns();
                let mut theta = DVector::zeros(cfg.d);
                for (c, &(s, n)) in cols.iter().enumerate() {
                    if n > 0 {
                        theta += u.column(c) * (s / n as f64);
                    }
                }
                assert!((theta.norm() - norm).abs() < 1e-9);
                assert_eq!(*samples, cols.iter().map(|c| c.1).sum::<u64>());
                checked += 1;
            }
            _ => {}
        }
    }
    assert!(checked > 20);
}

#[test]
fn logged_exploit_choices_replay_against_dense_linucb() {
    let cfg = RunConfig {
        n: 1,
        ..small_config(Policy::SubgossSingle)
    };
    let run = run_seed(&cfg, None, 2, ExecMode::Sequential).unwrap();
    let inst = &run.instance;
    let actions: Vec<DVector<f64>> = (0..inst.n_actions()).map(|i| inst.action(i)).collect();
    let delta = 1.0 / cfg.t as f64;
    let mut hist: HashMap<usize, (Vec<DVector<f64>>, Vec<f64>)> = HashMap::new();
    let mut checked = 0;
    for e in &run.result.events {
        if let EventKind::ExploitPlay { subspace: Some(k), action, reward } = &e.kind {
            let u = inst.subspaces().basis(*k).columns();
            let p = u * u.transpose();
            let (acts, rews) = hist.entry(*k).or_default();
            let (theta, v_pinv) = dense_ridge(u, acts, rews, cfg.lambda);
            let beta = beta_oracle(delta, cfg.m, cfg.lambda, acts.len() as u64, cfg.s_bound);
            let scores: Vec<f64> = actions.iter().map(|a| dense_ucb(&theta, &v_pinv, &p, a, beta)).collect();
            let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(top - scores[*action] < 1e-9, "t={} chose {action}", e.t);
            acts.push(actions[*action].clone());
            rews.push(*reward);
            checked += 1;
        }
    }
    assert!(checked > 100, "{checked}");
}

#[test]
fn explore_slot_counts_match_budget_replay() {
    for mode in [ExploreBudgetMode::Experimental, ExploreBudgetMode::Theoretical] {
        let cfg = RunConfig {
            explore_budget_mode: mode,
            ..small_config(Policy::SubgossMulti)
        };
        let run = run_seed(&cfg, cfg.gossip_matrix().unwrap().as_ref(), 0, ExecMode::Sequential).unwrap();
        let mut counted: HashMap<(usize, u64), u64> = HashMap::new();
        for e in &run.result.events {
            if matches!(e.kind, EventKind::ExplorePlay { .. }) {
                *counted.entry((e.agent, e.phase)).or_default() += 1;
            }
        }
        let mut total_replay = 0;
        for (rec, phase) in run.result.phases.iter().zip(phases(cfg.b, cfg.t).unwrap()) {
            let budget = explore_budget(mode, cfg.m, cfg.b, phase.j);
            for (i, a) in rec.agents.iter().enumerate() {
                let planned = phase.len().min(a.active.len() as u64 * budget);
                let want = planned.min(rec.end - rec.start + 1);
                assert_eq!(counted.get(&(i, phase.j)).copied().unwrap_or(0), want);
                assert_eq!(a.explore_slots, want);
                total_replay += want;
            }
        }
        assert_eq!(total_replay, counted.values().sum::<u64>());
    }
}

#[test]
fn communications_equal_completed_phases() {
    for t in [1, 2, 3, 7, 100, 1023, 1024, 5000] {
        let cfg = RunConfig {
            t,
            events: EventLevel::None,
            ..small_config(Policy::SubgossMulti)
        };
        let run = run_seed(&cfg, cfg.gossip_matrix().unwrap().as_ref(), 0, ExecMode::Sequential).unwrap();
        let completed = run.result.phases.iter().filter(|p| p.complete).count() as u64;
        assert_eq!(run.result.communications, completed);
        let cap = ((1.0 + t as f64 * (cfg.b - 1.0)).ln() / cfg.b.ln()).ceil() as u64 + 1;
        assert!(run.result.communications <= cap);
    }
}

#[test]
fn noiseless_genie_is_always_covered_and_decelerates() {
    // Without noise the ridge error is pure shrinkage, ||theta_hat - theta*||_V <= S sqrt(lambda) <= beta,
    // but the radius keeps its log(1/delta) term, so optimism still buys the odd exploratory play.
    let cfg = RunConfig {
        noise_std: 0.0,
        t: 4000,
        policy: Policy::Genie,
        ..RunConfig::default()
    };
    for seed in 0..5 {
        let (inst, _) = subgoss::harness::build_instance(&cfg, seed).unwrap();
        let mut params = cfg.sim_params(ExecMode::Sequential);
        params.track_coverage = true;
        let streams = subgoss::policies::Streams {
            master_seed: cfg.master_seed,
            seed_index: seed,
        };
        let run = subgoss::policies::run_genie(&inst, &params, streams).unwrap();
        assert_eq!(run.coverage_violation, None, "seed {seed}");
        let cum = &run.cum_regret[0];
        let first = cum[1999];
        let second = cum[3999] - cum[1999];
        assert!(second < first, "seed {seed}: {first} then {second}");
    }
}

#[test]
fn noiseless_agents_freeze_once_they_hold_the_true_subspace() {
    let cfg = RunConfig {
        d: 10,
        m: 1,
        k: 6,
        n: 6,
        t: 3000,
        noise_std: 0.0,
        true_index: 2,
        ..RunConfig::default()
    };
    for seed in 0..5 {
        let run = run_seed(&cfg, cfg.gossip_matrix().unwrap().as_ref(), seed, ExecMode::Sequential).unwrap();
        for i in 0..cfg.n {
            let mut holding = false;
            for p in &run.result.phases {
                let a = &p.agents[i];
                holding |= a.active.contains(&cfg.true_index);
                if holding {
                    assert!(a.active.contains(&cfg.true_index));
                    if let Some(best) = a.best {
                        assert_eq!(best, cfg.true_index, "seed {seed} agent {i} phase {}", p.j);
                    }
                }
            }
            assert!(holding);
        }
        assert!(run.result.freeze_phase.is_some());
    }
}

#[test]
fn aggregate_matches_independent_statistics() {
    let cfg = RunConfig {
        d: 8,
        m: 2,
        k: 4,
        n: 2,
        t: 300,
        n_seeds: 30,
        ..RunConfig::default()
    };
    let runs = run_config(&cfg, ExecMode::Parallel).unwrap();
    let results: Vec<RunResult> = runs.into_iter().map(|s| s.result).collect();
    for (mode, curves) in [
        (
            AggregateMode::SeedMeans,
            results
                .iter()
                .map(|r| (0..300).map(|t| (r.cum_regret[0][t] + r.cum_regret[1][t]) / 2.0).collect::<Vec<f64>>())
                .collect::<Vec<_>>(),
        ),
        (AggregateMode::Pooled, results.iter().flat_map(|r| r.cum_regret.clone()).collect()),
    ] {
        let agg = aggregate(&results, mode).unwrap();
        for t in 0..300 {
            let col: Vec<f64> = curves.iter().map(|c| c[t]).collect();
            let (mean, se) = welford(&col);
            assert!((agg.mean[t] - mean).abs() < 1e-9);
            assert!((agg.ci_high[t] - (mean + 1.96 * se)).abs() < 1e-9);
            assert!((agg.ci_low[t] - (mean - 1.96 * se)).abs() < 1e-9);
            assert!(agg.ci_low[t] <= agg.mean[t] && agg.mean[t] <= agg.ci_high[t]);
        }
    }
}

#[test]
fn csv_edge_cases_and_round_trips() {
    let empty = Aggregate {
        mean: vec![],
        ci_low: vec![],
        ci_high: vec![],
        samples: 0,
    };
    let mut buf = Vec::new();
    write_aggregate(&empty, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "t,mean,ci_low,ci_high\n");

    let one = Aggregate {
        mean: vec![1.5],
        ci_low: vec![1.0],
        ci_high: vec![2.0],
        samples: 0,
    };
    let mut buf = Vec::new();
    write_aggregate(&one, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(parse_aggregate(&text).unwrap(), one);

    let cfg = RunConfig {
        t: 50,
        n_seeds: 2,
        events: EventLevel::None,
        ..small_config(Policy::SubgossMulti)
    };
    let results: Vec<RunResult> = run_config(&cfg, ExecMode::Sequential).unwrap().into_iter().map(|s| s.result).collect();
    let mut buf = Vec::new();
    write_raw(&results, &mut buf).unwrap();
    let rows = parse_raw(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 50);
    for row in rows {
        let r = &results[row.seed as usize];
        assert_eq!(row.inst_regret, r.inst_regret[row.agent][row.t as usize - 1]);
        assert_eq!(row.cum_regret, r.cum_regret[row.agent][row.t as usize - 1]);
    }
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_subgoss")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let out = cli(&["validate", "--K", "12", "--N", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("divisible"));

    assert_eq!(cli(&["run", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(cli(&["validate", "--config", "/nonexistent/config.toml"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "K = 12\nwhat = 3\n").unwrap();
    assert_eq!(cli(&["validate", "--config", bad.to_str().unwrap()]).status.code(), Some(2));

    let reducible = dir.path().join("red.toml");
    std::fs::write(
        &reducible,
        "N = 4\nK = 4\n[gossip]\nkind = \"matrix\"\nrows = [[0,1,0,0],[1,0,0,0],[0,0,0,1],[0,0,1,0]]\n",
    )
    .unwrap();
    let out = cli(&["validate", "--config", reducible.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[0, 1]"));

    let blocked = dir.path().join("file");
    std::fs::write(&blocked, "").unwrap();
    let out_dir = blocked.join("sub");
    let out = cli(&["run", "--policy", "genie", "--T", "20", "--n-seeds", "2", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(cli(&["validate"]).status.code(), Some(0));
}

#[test]
fn cli_run_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "d = 8\nm = 2\nK = 4\nN = 2\nT = 200\nn_seeds = 3\nevents = \"phases\"\n").unwrap();
    let out = dir.path().join("o");
    let res = cli(&["run", "--config", cfg.to_str().unwrap(), "--raw", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let agg = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 201);
    let raw = std::fs::read_to_string(out.join("raw.csv")).unwrap();
    assert_eq!(raw.lines().count(), 1 + 3 * 2 * 200);
    let events = std::fs::read_to_string(out.join("events.jsonl")).unwrap();
    for line in events.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["seed"].is_u64() && v["event"].is_string());
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn lemma3_never_exceeds_twice_lemma2_at_half_gap() {
    for &gap in &[0.05, 0.3, 1.0] {
        for m in 1..5 {
            for j in 1..20 {
                let l3 = lemma3_tail(gap, m, 2.0, j);
                let l2 = lemma2_tail_phase(gap / 2.0, m, 2.0, j);
                assert!(l3 <= 2.0 * l2 * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn basis_from_matrix_rejects_non_orthonormal() {
    let mut m = DMatrix::identity(4, 2);
    m[(0, 1)] = 0.1;
    assert!(Basis::new(m).is_err());
}

