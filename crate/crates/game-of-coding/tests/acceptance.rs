//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them all).

use game_of_coding::adversary::{brute_force_beta, symmetrize, DiscreteSymmetricNoise};
use game_of_coding::config::{load_config, GridSpec, SolveConfig};
use game_of_coding::envelope::{build_envelope, build_envelope_with, TangentInterval};
use game_of_coding::equilibrium::{brute_force_stackelberg, solve_stackelberg};
use game_of_coding::simulator::{
    mmse_gap_check, orthogonality_check, simulate, SimConfig, TestFunction,
};
use game_of_coding::{synthesize_optimal_noise, HonestNoise};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::time::Instant;

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn example(n: usize) -> SolveConfig {
    load_config(&config_dir().join(format!("example{n}.json")), &[]).unwrap()
}

fn unit_noise() -> HonestNoise {
    HonestNoise::uniform(1.0).unwrap()
}

/// Closed-form error curve and envelope for uniform unit honest noise.
fn h_exact(eta: f64, q: f64) -> f64 {
    let a = eta + 2.0 - 2.0 * q;
    let b = eta + 2.0 - 4.0 * q;
    (a * a * a - b * b * b) / 6.0
}

fn h_star_exact(eta: f64, q: f64) -> f64 {
    let qt = (9.0 * eta + 4.0) / 28.0;
    if eta >= 8.0 / 3.0 || q <= qt {
        h_exact(eta, q)
    } else {
        let h1 = h_exact(eta, 1.0);
        let ht = h_exact(eta, qt);
        (h1 - ht) / (1.0 - qt) * (q - qt) + ht
    }
}

fn report(criterion: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("criterion {criterion}: PASS");
    } else {
        println!("criterion {criterion}: FAIL");
        for f in failures {
            println!("  - {f}");
        }
        panic!("criterion {criterion} failed:\n{}", failures.join("\n"));
    }
}

#[test]
fn criterion_1_example1_regression() {
    let cfg = example(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let r = pool.install(|| solve_stackelberg(&cfg).unwrap());
    let elapsed = start.elapsed();
    let mut failures = Vec::new();
    if r.eta_star != 6.75 {
        failures.push(format!("eta* = {} (want exactly 6.75)", r.eta_star));
    }
    if (r.pa - 0.807).abs() > 0.005 {
        failures.push(format!("PA = {} (want 0.807 +/- 0.005)", r.pa));
    }
    if !(10.0..=11.0).contains(&r.mmse) {
        failures.push(format!("MMSE = {} (want within [10.0, 11.0])", r.mmse));
    }
    if elapsed.as_secs_f64() >= 10.0 {
        failures.push(format!(
            "single-threaded solve took {:.2}s (budget 10s)",
            elapsed.as_secs_f64()
        ));
    }
    println!(
        "  example 1: eta*={} PA={} MMSE={:.4} in {:.2}s",
        r.eta_star,
        r.pa,
        r.mmse,
        elapsed.as_secs_f64()
    );
    report("1 (example 1 regression)", &failures);
}

#[test]
fn criterion_2_example2_regression() {
    let cfg = example(2);
    let r = solve_stackelberg(&cfg).unwrap();
    let mut failures = Vec::new();
    if r.eta_star != 3.75 {
        failures.push(format!("eta* = {} (want exactly 3.75)", r.eta_star));
    }
    if (r.pa - 0.214).abs() > 0.005 {
        failures.push(format!("PA = {} (want 0.214 +/- 0.005)", r.pa));
    }
    if (r.mmse - 6.52).abs() > 0.1 {
        failures.push(format!("MMSE = {} (want 6.52 +/- 0.1)", r.mmse));
    }
    println!(
        "  example 2: eta*={} PA={} MMSE={:.4}",
        r.eta_star, r.pa, r.mmse
    );
    // This scenario's collector utility is scale-invariant along every
    // best-response curve, so in the continuum all thresholds tie exactly
    // and the committed threshold is an artifact of grid quantization; see
    // the value-level check below and the frontier point asserted in
    // fig3_curve_consistency.
    report("2 (example 2 regression)", &failures);
}

#[test]
fn criterion_3_example3_regression() {
    let mut failures = Vec::new();
    for floor in [1e-2, 1e-3, 1e-4] {
        let mut cfg = example(3);
        cfg.frontier.alpha_grid = GridSpec::new(floor, 1.0, floor);
        let r = solve_stackelberg(&cfg).unwrap();
        println!(
            "  floor {floor:.0e}: eta*={} PA={} MMSE={:.5}",
            r.eta_star, r.pa, r.mmse
        );
        if r.eta_star != 2.0 {
            failures.push(format!("floor {floor}: eta* = {} (want 2)", r.eta_star));
        }
        if r.pa != floor {
            failures.push(format!("floor {floor}: PA = {} (want the floor)", r.pa));
        }
        if (r.mmse - 4.0).abs() > 0.05 {
            failures.push(format!(
                "floor {floor}: MMSE = {} (want 4 +/- 0.05)",
                r.mmse
            ));
        }
    }
    report("3 (example 3 regression)", &failures);
}

#[test]
fn criterion_4_frontier_vs_pair_search() {
    let noise = unit_noise();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let start = Instant::now();
    let mut failures = Vec::new();
    for i in 0..30 {
        let eta = 2.0 + 6.0 * rng.gen::<f64>();
        let alpha = 0.05 + 0.95 * rng.gen::<f64>();
        let env = build_envelope_with(&noise, eta, 4096, &[alpha]).unwrap();
        let beta = env.worst_mse(alpha).unwrap();
        let bf = brute_force_beta(&noise, eta, alpha, 2001).unwrap();
        if bf > beta + 1e-9 {
            failures.push(format!(
                "case {i} (eta={eta:.4}, alpha={alpha:.4}): pair search {bf} exceeds frontier {beta}"
            ));
        }
        if beta - bf > 5e-3 {
            failures.push(format!(
                "case {i} (eta={eta:.4}, alpha={alpha:.4}): frontier {beta} above pair search {bf} by {:.2e}",
                beta - bf
            ));
        }
        let g = synthesize_optimal_noise(&noise, eta, alpha, &env).unwrap();
        let eval = g.evaluate(&noise, eta).unwrap();
        if (eval.mse_mean.unwrap() - beta).abs() > 1e-9 {
            failures.push(format!(
                "case {i}: synthesized mixture misses the frontier by {:.2e}",
                (eval.mse_mean.unwrap() - beta).abs()
            ));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 60.0 {
        failures.push(format!("took {elapsed:.1}s (budget 60s)"));
    }
    println!("  30 random frontier points in {elapsed:.2}s");
    report("4 (frontier vs pair-search oracle)", &failures);
}

#[test]
fn criterion_5_equilibrium_route_agreement() {
    // Both routes run on a shared acceptance lattice aligned with the
    // support grid (k-step = alpha-step = 0.01), where single-magnitude
    // candidates sit exactly on the frontier. Off-lattice support points
    // scallop the enumerated frontier by enough to scramble argmax
    // positions by a few grid steps, which sharp collector utilities
    // amplify past any threshold margin.
    let mut failures = Vec::new();
    let mut check = |label: &str, cfg: &SolveConfig| {
        let mut cfg = cfg.clone();
        cfg.frontier.alpha_grid = GridSpec::new(0.01, 1.0, 0.01);
        let solved = solve_stackelberg(&cfg).unwrap();
        let brute = brute_force_stackelberg(&cfg, 101).unwrap();
        println!(
            "  {label}: frontier eta*={} (PA={:.4}, MMSE={:.4}); search eta*={} (PA={:.4}, MMSE={:.4})",
            solved.eta_star, solved.pa, solved.mmse, brute.eta_star, brute.pa, brute.mmse
        );
        if solved.eta_star != brute.eta_star {
            failures.push(format!(
                "{label}: routes disagree on eta* ({} vs {})",
                solved.eta_star, brute.eta_star
            ));
            return;
        }
        if (solved.pa - brute.pa).abs() > 2e-3 {
            failures.push(format!(
                "{label}: |dPA| = {:.2e} (allowed 2e-3)",
                (solved.pa - brute.pa).abs()
            ));
        }
        if (solved.mmse - brute.mmse).abs() > 5e-2 {
            failures.push(format!(
                "{label}: |dMMSE| = {:.2e} (allowed 5e-2)",
                (solved.mmse - brute.mmse).abs()
            ));
        }
    };
    for n in 1..=3 {
        check(&format!("example {n}"), &example(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    for i in 0..10 {
        let gamma = 0.4 + 1.1 * rng.gen::<f64>();
        let lambda = 8.0 + 32.0 * rng.gen::<f64>();
        let mut cfg = example(1);
        cfg.u_ad = format!("log(MMSE) + {gamma:.6}*log(PA)");
        cfg.u_dc = format!("-MMSE + {lambda:.6}*PA");
        check(&format!("random pair {i}"), &cfg);
    }
    report("5 (equilibrium route agreement)", &failures);
}

#[test]
fn criterion_6_uniform_noise_envelope_exactness() {
    let noise = unit_noise();
    let mut failures = Vec::new();
    for eta in [3.0, 4.0, 6.0, 8.0] {
        let env = build_envelope(&noise, eta, 4096).unwrap();
        let mut worst: f64 = 0.0;
        for (i, &(_, v)) in env.knots().iter().enumerate() {
            worst = worst.max((v - env.curve_value(i)).abs());
        }
        if worst > 1e-9 {
            failures.push(format!(
                "eta={eta}: concave curve lifted by {worst:.2e} (allowed 1e-9)"
            ));
        }
    }
    for eta in [2.0, 2.2, 2.5] {
        let env = build_envelope(&noise, eta, 4096).unwrap();
        let qt = (9.0 * eta + 4.0) / 28.0;
        match env.tangent_interval(0.999).unwrap() {
            TangentInterval::Segment(q1, q2) => {
                if (q1 - qt).abs() > 2.0 / 4096.0 {
                    failures.push(format!(
                        "eta={eta}: bridge starts at {q1} (want {qt} within {:.2e})",
                        2.0 / 4096.0
                    ));
                }
                if q2 != 1.0 {
                    failures.push(format!("eta={eta}: bridge ends at {q2} (want 1)"));
                }
            }
            other => failures.push(format!("eta={eta}: expected a bridge, got {other:?}")),
        }
        let mut worst: f64 = 0.0;
        for i in 0..=100 {
            let q = qt + (1.0 - qt) * i as f64 / 100.0;
            worst = worst.max((env.value(q).unwrap() - h_star_exact(eta, q)).abs());
        }
        if worst > 1e-6 {
            failures.push(format!(
                "eta={eta}: bridge deviates from the closed form by {worst:.2e} (allowed 1e-6)"
            ));
        }
    }
    report("6 (envelope exactness for uniform noise)", &failures);
}

/// Random mixture with at least one always-accepted magnitude carrying a
/// tenth of the mass or more, so acceptance stays bounded away from zero.
fn random_mixture(rng: &mut ChaCha8Rng, eta: f64) -> DiscreteSymmetricNoise {
    let n_extra = rng.gen_range(0..3usize);
    let mut raw: Vec<(f64, f64)> = vec![(rng.gen::<f64>() * (eta - 1.0), 0.1 + rng.gen::<f64>())];
    for _ in 0..n_extra {
        raw.push((rng.gen::<f64>() * (eta + 1.0), 0.05 + rng.gen::<f64>()));
    }
    let total: f64 = raw.iter().map(|a| a.1).sum();
    let mut atoms: Vec<(f64, f64)> = raw.iter().map(|&(z, w)| (z, w / total)).collect();
    // Separate coincident magnitudes instead of merging, for variety.
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for i in 1..atoms.len() {
        if atoms[i].0 - atoms[i - 1].0 < 1e-6 {
            atoms[i].0 += 1e-3;
        }
    }
    symmetrize(&atoms).unwrap()
}

#[test]
fn criterion_7_monte_carlo_agreement() {
    let noise = unit_noise();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let start = Instant::now();
    let mut within = 0usize;
    let mut failures = Vec::new();
    let mut configs = Vec::new();
    for i in 0..40 {
        let eta = 2.0 + 6.0 * rng.gen::<f64>();
        let g = random_mixture(&mut rng, eta);
        let pa = g.acceptance_probability(&noise, eta).unwrap();
        let mse = g.mse_mean(&noise, eta).unwrap();
        let cfg = SimConfig::new(
            1000.0,
            1.0,
            eta,
            noise.clone(),
            g,
            1_000_000,
            0xC7_0000 + i,
        )
        .unwrap();
        let stats = simulate(&cfg);
        let pa_ok = (stats.pa_hat - pa).abs() <= 4.0 * stats.pa_stderr.max(1e-12);
        let mse_ok = (stats.mse_mean_hat.unwrap() - mse).abs()
            <= 4.0 * stats.mse_stderr.unwrap().max(1e-12);
        if pa_ok && mse_ok {
            within += 1;
        }
        configs.push(cfg);
    }
    if within < 38 {
        failures.push(format!(
            "only {within}/40 configs inside 4 standard errors (need 38)"
        ));
    }
    for (i, cfg) in configs.iter().take(10).enumerate() {
        for r in orthogonality_check(cfg, &TestFunction::all()).unwrap() {
            if r.residual.abs() > 4.0 * r.stderr {
                failures.push(format!(
                    "config {i} test function {}: residual {:.3e} vs stderr {:.3e}",
                    r.test_function, r.residual, r.stderr
                ));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 300.0 {
        failures.push(format!("took {elapsed:.0}s (budget 300s)"));
    }
    println!("  {within}/40 configs within 4 sigma; orthogonality on 10 configs; {elapsed:.1}s");
    report("7 (Monte Carlo agreement)", &failures);
}

#[test]
fn criterion_8_vanishing_gap_bound() {
    // The strongest known adversary at the example-1 equilibrium.
    let noise = unit_noise();
    let env = build_envelope_with(&noise, 6.75, 4096, &[0.807]).unwrap();
    let g = synthesize_optimal_noise(&noise, 6.75, 0.807, &env).unwrap();
    let mut failures = Vec::new();
    let mut gaps = Vec::new();
    for (m, n, bins) in [(1e3, 1_000_000u64, 8usize), (1e5, 10_000_000, 1)] {
        let cfg = SimConfig::new(m, 1.0, 6.75, noise.clone(), g.clone(), n, 0xC8).unwrap();
        let check = mmse_gap_check(&cfg, bins).unwrap();
        println!(
            "  M={m:.0e}: gap={:.6} bound={:.6} stderr={:.2e} occupancy={}",
            check.gap, check.bound, check.gap_stderr, check.median_occupancy
        );
        if check.gap > check.bound + 4.0 * check.gap_stderr + check.bin_allowance {
            failures.push(format!(
                "M={m}: gap {:.6} above bound {:.6} + tolerances",
                check.gap, check.bound
            ));
        }
        gaps.push(check.gap);
    }
    if gaps[0] < 10.0 * gaps[1] {
        failures.push(format!(
            "gap shrank only {:.1}x between M=1e3 and M=1e5 (need 10x)",
            gaps[0] / gaps[1]
        ));
    }
    report("8 (vanishing estimator gap)", &failures);
}

#[test]
fn criterion_9_symmetrization_invariance() {
    // Signed-atom reference evaluator for uniform unit honest noise.
    fn reference_eval(signed: &[(f64, f64)], eta: f64) -> (f64, f64) {
        let (mut pa, mut num) = (0.0, 0.0);
        for &(s, w) in signed {
            let lo = (s - eta).max(-1.0);
            let hi = (s + eta).min(1.0);
            if hi <= lo {
                continue;
            }
            pa += w * (hi - lo) * 0.5;
            let c = |x: f64| (x + s) * (x + s) * (x + s) / 6.0;
            num += w * (c(hi) - c(lo));
        }
        (pa, num / (4.0 * pa))
    }
    let noise = unit_noise();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC9);
    let mut failures = Vec::new();
    for i in 0..50 {
        let eta = 2.0 + 6.0 * rng.gen::<f64>();
        let n = 1 + rng.gen_range(0..5usize);
        let mut raw: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                (
                    (rng.gen::<f64>() * 2.0 - 1.0) * (eta + 1.0),
                    0.05 + rng.gen::<f64>(),
                )
            })
            .collect();
        let total: f64 = raw.iter().map(|a| a.1).sum();
        for a in &mut raw {
            a.1 /= total;
        }
        let (ref_pa, ref_mse) = reference_eval(&raw, eta);
        let g = symmetrize(&raw).unwrap();
        let eval = g.evaluate(&noise, eta).unwrap();
        if (eval.pa - ref_pa).abs() > 1e-12 {
            failures.push(format!(
                "mixture {i}: acceptance changed by {:.2e}",
                (eval.pa - ref_pa).abs()
            ));
        }
        if ref_pa > 0.0 {
            let mse = eval.mse_mean.unwrap();
            if (mse - ref_mse).abs() > 1e-12 * ref_mse.max(1.0) {
                failures.push(format!(
                    "mixture {i}: error changed by {:.2e}",
                    (mse - ref_mse).abs()
                ));
            }
        }
    }
    report("9 (symmetrization invariance)", &failures);
}

#[test]
fn fig3_curve_consistency() {
    // The equilibrium points of all three reference scenarios must lie on
    // the emitted frontier family. For the grid-degenerate second scenario
    // the reference frontier point is asserted directly.
    let noise = unit_noise();
    let alphas = GridSpec::new(0.001, 1.0, 0.001).values().unwrap();
    let mut failures = Vec::new();
    let frontier_at = |eta: f64, alpha: f64| -> f64 {
        let env = build_envelope_with(&noise, eta, 4096, &alphas).unwrap();
        env.worst_mse(alpha).unwrap()
    };
    let r1 = solve_stackelberg(&example(1)).unwrap();
    if (frontier_at(r1.eta_star, r1.pa) - r1.mmse).abs() > 1e-12 {
        failures.push("example 1 equilibrium is off its frontier curve".into());
    }
    let r3 = solve_stackelberg(&example(3)).unwrap();
    if (frontier_at(r3.eta_star, r3.pa) - r3.mmse).abs() > 1e-12 {
        failures.push("example 3 equilibrium is off its frontier curve".into());
    }
    let b2 = frontier_at(3.75, 0.214);
    if (b2 - 6.52).abs() > 0.1 {
        failures.push(format!(
            "frontier at (3.75, 0.214) is {b2:.4}, want 6.52 +/- 0.1"
        ));
    }
    println!("  frontier(3.75, 0.214) = {b2:.5}");
    report("footer (equilibria lie on the curve family)", &failures);
}
