//! End-to-end acceptance suite.
//!
//! Each test checks one headline behavior of the crate and prints a single
//! `[PASS]`/`[FAIL]` line (visible with `--nocapture`, or in the captured
//! output of a failing test). The numeric prefixes only fix the reporting
//! order. The two desk-scale learning tests train real configurations and
//! dominate the suite's runtime; everything else finishes in seconds.

use std::time::{Duration, Instant};

use barocco::ac_framework::coma_advantage;
use barocco::envs::{enumerate_allocator_outcomes, termination_toy_values};
use barocco::harness::{run, ExperimentConfig};
use barocco::numerics::{
    finite_difference_grads, grad_check, ppo_loss, Activation, DenseNetwork,
};
use barocco::q_framework::MixingAssembly;
use barocco::rng::{stream_rng, Stream};
use barocco::tabular::{
    check_mpd_bands, exact_policy_eval, factorization_check, mpd_sweep, random_game,
    random_policies,
};
use rand::Rng;

/// Prints the per-criterion verdict line and fails the test on `false`.
fn verdict(name: &str, passed: bool, detail: &str) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("[{tag}] {name} - {detail}");
    assert!(passed, "{name}: {detail}");
}

/// Mean of the `score` column over the last `k` evaluation rows of a run.
fn tail_mean_score(rows: &[barocco::harness::MetricRow], k: usize) -> f64 {
    assert!(rows.len() >= k, "run produced too few evaluation rows");
    rows[rows.len() - k..].iter().map(|r| r.score).sum::<f64>() / k as f64
}

#[test]
fn a01_matrix_game_lambda_sweep_bands() {
    let start = Instant::now();
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    let seeds = [0u64, 1, 2];
    let rows = mpd_sweep(&grid, &seeds);
    let mut passes = 0;
    for &seed in &seeds {
        let per_seed: Vec<_> = rows.iter().filter(|r| r.seed == seed).cloned().collect();
        if check_mpd_bands(&per_seed) {
            passes += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        "01 matrix-game lambda-sweep bands",
        passes >= 2 && elapsed < Duration::from_secs(60),
        &format!(
            "defect/cooperate/sacrifice bands with nominal boundaries at 0.4 and 0.9 \
             (one grid-step shift allowed) in {passes}/3 seeds, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn a02_allocator_closed_forms() {
    let start = Instant::now();
    let gamma = 0.9;
    let mut max_err = 0.0f64;
    for o in enumerate_allocator_outcomes(gamma) {
        let repeat = o.option[0] == o.option[1];
        // Same recipient twice: 1 + 2γ = 2.8; split: 1 + γ = 1.9.
        let expect_sum = if repeat { 2.8 } else { 1.9 };
        // The worst-off agent's return is γ = 0.9 under a split, 0 otherwise;
        // per-step min welfare is always 0 because someone gets nothing.
        let expect_min_long = if repeat { 0.0 } else { 0.9 };
        max_err = max_err
            .max((o.v_short_sum - expect_sum).abs())
            .max((o.v_long_sum - expect_sum).abs())
            .max(o.v_short_min.abs())
            .max((o.v_long_min - expect_min_long).abs());
    }
    let elapsed = start.elapsed();
    verdict(
        "02 allocator closed forms",
        max_err < 1e-12 && elapsed < Duration::from_secs(1),
        &format!("max |err| = {max_err:.2e} at gamma = 0.9, {:.3}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn a03_termination_toy_bootstrap_cuts() {
    let g: f64 = 0.95;
    let v = termination_toy_values(3, 7, g);
    let mut max_err = (v.v_selfish[0] + g.powi(3))
        .abs()
        .max((v.v_selfish[1] + g.powi(7)).abs())
        .max((v.v_long + g.powi(3) + g.powi(7)).abs())
        .max((v.v_short[1] + g.powi(3) + g.powi(7)).abs());
    // Agent 0's short-term social value stops at its own death and must not
    // depend on when the other agent dies.
    for t2 in [5, 7, 20] {
        let other = termination_toy_values(3, t2, g);
        max_err = max_err.max((other.v_short[0] - v.v_short[0]).abs());
    }
    verdict(
        "03 termination-toy closed forms",
        max_err < 1e-12,
        &format!("max |err| = {max_err:.2e}; agent 0 short-term value independent of T2"),
    );
}

#[test]
fn a04_value_factorization_identity() {
    let mut rng = stream_rng(7, Stream::Custom(910));
    let mut max_dev = 0.0f64;
    for _ in 0..50 {
        let states = rng.gen_range(1..=4);
        let game = random_game(states, &[2, 2], 0.9, &mut rng);
        let policies = random_policies(&game, &mut rng);
        for &lambda in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            max_dev = max_dev.max(factorization_check(&game, &policies, lambda));
        }
    }
    verdict(
        "04 value-factorization identity",
        max_dev < 1e-10,
        &format!("max |mixed - factored| = {max_dev:.2e} over 50 games x 5 lambdas"),
    );
}

#[test]
fn a05_sum_welfare_commutativity_and_min_divergence() {
    // Same game distribution as the factorization test, fresh draws.
    let mut rng = stream_rng(7, Stream::Custom(911));
    let mut max_comm = 0.0f64;
    for _ in 0..50 {
        let states = rng.gen_range(1..=4);
        let game = random_game(states, &[2, 2], 0.9, &mut rng);
        let policies = random_policies(&game, &mut rng);
        let eval = exact_policy_eval(&game, &policies);
        for s in 0..states {
            max_comm = max_comm.max((eval.v_short_sum[s] - eval.v_long_sum[s]).abs());
        }
    }
    // For min welfare the two orders genuinely differ: on the allocator the
    // short-term value is identically 0 while the long-term value of every
    // split option is γ.
    let table = enumerate_allocator_outcomes(0.9);
    let split_gap = table
        .iter()
        .filter(|o| o.option[0] != o.option[1])
        .map(|o| o.v_long_min - o.v_short_min)
        .fold(f64::INFINITY, f64::min);
    verdict(
        "05 sum commutativity / min divergence",
        max_comm < 1e-10 && split_gap > 0.5,
        &format!(
            "max sum |short - long| = {max_comm:.2e}; min splits differ by {split_gap:.2}"
        ),
    );
}

#[test]
fn a06_social_mixing_monotonicity() {
    let mut rng = stream_rng(7, Stream::Custom(912));
    let mut min_slope = f64::INFINITY;
    let mut probes = 0;
    for _ in 0..10 {
        let assembly = MixingAssembly::new(4, 5, &[2, 2], &[8], 8, 16, 1e-3, 1.0, &mut rng);
        for _ in 0..100 {
            let state: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let contributions: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for dim in 0..2 {
                let h = 1e-5;
                let mut up = contributions.clone();
                up[dim] += h;
                let mut down = contributions.clone();
                down[dim] -= h;
                let slope =
                    (assembly.mix_single(&up, &state) - assembly.mix_single(&down, &state))
                        / (2.0 * h);
                min_slope = min_slope.min(slope);
                probes += 1;
            }
        }
    }
    verdict(
        "06 social-mixing monotonicity",
        probes >= 1000 && min_slope >= -1e-9,
        &format!("min finite-difference slope = {min_slope:.3e} over {probes} probes"),
    );
}

#[test]
fn a07_counterfactual_advantage_zero_mean() {
    let mut rng = stream_rng(7, Stream::Custom(913));
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=6);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let mut p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = p.iter().sum();
        for x in &mut p {
            *x /= total;
        }
        let mean: f64 = (0..n).map(|a| p[a] * coma_advantage(&q, &p, a)).sum();
        worst = worst.max(mean.abs());
    }
    verdict(
        "07 counterfactual advantage zero mean",
        worst < 1e-9,
        &format!("max |E[A]| = {worst:.2e} over 1000 critic/policy pairs"),
    );
}

#[test]
#[allow(clippy::needless_range_loop)] // parallel indexing of analytic and numeric grads
fn a08_gradient_check() {
    let mut rng = stream_rng(7, Stream::Custom(914));
    let mut worst = 0.0f64;
    for k in 0..20 {
        let widths = vec![rng.gen_range(2..=4), rng.gen_range(3..=6), rng.gen_range(1..=3)];
        let output = if k % 2 == 0 { Activation::Identity } else { Activation::Softmax };
        let net = DenseNetwork::init_orthogonal(&widths, output, 1.0, &mut rng);
        let batch = rng.gen_range(1..=3);
        let input: Vec<f64> = (0..batch * widths[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |out: &[f64]| out.iter().map(|o| o * o).sum::<f64>();
        let loss_grad = |out: &[f64]| out.iter().map(|o| 2.0 * o).collect::<Vec<f64>>();
        let report = grad_check(&net, &input, batch, &loss, &loss_grad, 1e-5, 1e-4);
        worst = worst.max(report.max_relative_error);
    }
    // A corrupted analytic gradient must be flagged: flip the sign of one
    // entry and require the comparison to exceed the tolerance.
    let detected = {
        let net = DenseNetwork::init_orthogonal(&[3, 4, 2], Activation::Identity, 1.0, &mut rng);
        let input: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = |out: &[f64]| out.iter().map(|o| o * o).sum::<f64>();
        let (out, cache) = net.forward(&input, 1);
        let grads = net.backward(&cache, &out.iter().map(|o| 2.0 * o).collect::<Vec<f64>>());
        let numeric = finite_difference_grads(&net, &input, 1, &loss, 1e-5);
        let mut max_rel = 0.0f64;
        for idx in 0..net.num_params() {
            let a = DenseNetwork::get_grad(&grads, idx) * if idx == 0 { -1.0 } else { 1.0 };
            let n = numeric[idx];
            max_rel = max_rel.max((a - n).abs() / a.abs().max(n.abs()).max(1.0));
        }
        max_rel > 1e-4
    };
    verdict(
        "08 analytic gradients",
        worst < 1e-4 && detected,
        &format!("max relative error = {worst:.2e} over 20 nets; injected error detected = {detected}"),
    );
}

#[test]
fn a09_ppo_loss_cases() {
    let cases = [
        // (ratio, advantage, clip) -> (loss, dloss/dratio)
        ((1.0, 2.0, 0.2), (-2.0, -2.0)),
        ((2.0, 1.0, 0.2), (-1.2, 0.0)),
        ((0.5, -1.0, 0.2), (0.8, 0.0)),
    ];
    let mut ok = true;
    for ((r, a, c), (want_loss, want_grad)) in cases {
        let (loss, grad) = ppo_loss(r, a, c);
        ok &= (loss - want_loss).abs() < 1e-12;
        // The clipped branch must kill the gradient exactly, not merely
        // shrink it.
        ok &= if want_grad == 0.0 { grad == 0.0 } else { (grad - want_grad).abs() < 1e-12 };
    }
    verdict(
        "09 PPO clipped-loss cases",
        ok,
        "loss and gradient match hand-computed table; clipped gradient is exactly zero",
    );
}

/// Shared driver for the two desk-scale learning comparisons: trains the
/// prosocial configuration and the selfish baseline on three seeds each and
/// returns the per-algorithm mean of the late-training evaluation scores.
fn desk_gap(base: &str, out: &tempfile::TempDir) -> (f64, f64, f64) {
    let mut per_config_secs = 0.0f64;
    let mut means = Vec::new();
    for algorithm in ["barocco", "selfish"] {
        let started = Instant::now();
        let mut seed_scores = Vec::new();
        for seed in 0..3u64 {
            let text = format!("{base}algorithm = \"{algorithm}\"\nseed = {seed}\n");
            let cfg = ExperimentConfig::from_toml_str(&text).expect("acceptance config parses");
            let path = out.path().join(format!("{algorithm}{seed}.csv"));
            let artifacts = run(&cfg, Some(&path)).expect("training run completes");
            seed_scores.push(tail_mean_score(&artifacts.rows, 5));
        }
        per_config_secs = per_config_secs.max(started.elapsed().as_secs_f64() / 3.0);
        means.push(seed_scores.iter().sum::<f64>() / seed_scores.len() as f64);
    }
    (means[0], means[1], per_config_secs)
}

#[test]
fn a10_desk_scale_learning_gaps() {
    let out = tempfile::tempdir().expect("tempdir");

    let harvest = "\
environment = \"harvest\"
framework = \"q\"
sw = \"sum\"
lambda = 1.0
total_steps = 30000
eval_interval = 1000
eval_episodes = 3
";
    let (harvest_social, harvest_selfish, harvest_secs) = desk_gap(harvest, &out);

    let eldorado = "\
environment = \"eldorado\"
framework = \"ac\"
sw = \"sum\"
lambda = 1.0
total_steps = 20000
eval_interval = 1000
eval_episodes = 3
";
    let (eldorado_social, eldorado_selfish, eldorado_secs) = desk_gap(eldorado, &out);

    let harvest_ok = harvest_social >= 1.2 * harvest_selfish;
    let eldorado_ok = eldorado_social > eldorado_selfish;
    let budget_ok = harvest_secs < 1800.0 && eldorado_secs < 1800.0;
    verdict(
        "10 desk-scale learning gaps",
        harvest_ok && eldorado_ok && budget_ok,
        &format!(
            "harvest apples {harvest_social:.1} vs selfish {harvest_selfish:.1} (need +20%); \
             eldorado lifetime {eldorado_social:.1} vs selfish {eldorado_selfish:.1}; \
             slowest config {:.0}s/run",
            harvest_secs.max(eldorado_secs)
        ),
    );
}

#[test]
fn a11_same_seed_runs_are_byte_identical() {
    let out = tempfile::tempdir().expect("tempdir");
    let text = "\
environment = \"harvest\"
framework = \"q\"
algorithm = \"barocco\"
sw = \"sum\"
lambda = 1.0
seed = 5
total_steps = 2000
eval_interval = 500
eval_episodes = 2
";
    let cfg = ExperimentConfig::from_toml_str(text).expect("acceptance config parses");
    let a = out.path().join("a.csv");
    let b = out.path().join("b.csv");
    run(&cfg, Some(&a)).expect("first run completes");
    run(&cfg, Some(&b)).expect("second run completes");
    let bytes_a = std::fs::read(&a).expect("first log readable");
    let bytes_b = std::fs::read(&b).expect("second log readable");
    verdict(
        "11 same-seed determinism",
        !bytes_a.is_empty() && bytes_a == bytes_b,
        &format!("two runs, {} bytes of metric log each, byte-identical", bytes_a.len()),
    );
}
