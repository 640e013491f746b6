//! Front-end behavior: output schemas, golden files, exit codes,
//! determinism.

use game_of_coding::cli::main_with_args;
use std::path::{Path, PathBuf};

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn run(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("goc").chain(args.iter().copied()))
}

fn run_to_string(args: &[&str]) -> (i32, String) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut full: Vec<&str> = args.to_vec();
    let out_str = out.to_string_lossy().into_owned();
    full.push("--output");
    full.push(&out_str);
    let code = run(&full);
    let text = std::fs::read_to_string(&out).unwrap_or_default();
    (code, text)
}

#[test]
fn solve_matches_golden_output() {
    for (cfg, gold) in [
        ("example1.json", "solve_example1.json"),
        ("example2.json", "solve_example2.json"),
        ("example3.json", "solve_example3.json"),
    ] {
        let (code, text) = run_to_string(&["solve", &config(cfg)]);
        assert_eq!(code, 0);
        let want = std::fs::read_to_string(golden(gold)).unwrap();
        assert_eq!(text, want, "solve output drifted for {cfg}");
    }
}

#[test]
fn solve_output_is_deterministic() {
    let (code_a, a) = run_to_string(&["solve", &config("example3.json")]);
    let (code_b, b) = run_to_string(&["solve", &config("example3.json")]);
    assert_eq!((code_a, code_b), (0, 0));
    assert_eq!(a, b);
}

#[test]
fn synthesize_matches_golden_output() {
    let (code, text) = run_to_string(&["synthesize", &config("synthesize_demo.json")]);
    assert_eq!(code, 0);
    let want = std::fs::read_to_string(golden("synthesize_demo.json")).unwrap();
    assert_eq!(text, want);
}

#[test]
fn curve_small_grid_matches_golden_output() {
    let (code, text) = run_to_string(&[
        "curve",
        &config("frontier.json"),
        "--set",
        "eta_grid.step=2.0",
        "--set",
        "alpha_grid.min=0.25",
        "--set",
        "alpha_grid.step=0.25",
    ]);
    assert_eq!(code, 0);
    let want = std::fs::read_to_string(golden("curve_small.csv")).unwrap();
    assert_eq!(text, want);
}

#[test]
fn curve_full_grid_has_expected_shape() {
    let (code, text) = run_to_string(&["curve", &config("frontier.json")]);
    assert_eq!(code, 0);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("eta,alpha,beta,c_lower,c_upper"));
    assert_eq!(lines.count(), 25 * 1000);
    assert!(text.ends_with('\n'));
    assert!(!text.contains('\r'));
}

#[test]
fn envelope_dump_lists_knots() {
    let (code, text) = run_to_string(&["envelope", &config("envelope_demo.json")]);
    assert_eq!(code, 0);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("q,value,hull_vertex"));
    let rows: Vec<&str> = lines.collect();
    // 4096 uniform samples plus the inserted tangency knot.
    assert_eq!(rows.len(), 4097);
    assert!(rows.iter().all(|r| {
        let last = r.rsplit(',').next().unwrap();
        last == "0" || last == "1"
    }));
}

#[test]
fn simulate_reports_statistics_and_dumps_rounds() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("rounds.csv");
    let dump_str = dump.to_string_lossy().into_owned();
    let (code, text) = run_to_string(&[
        "simulate",
        &config("simulate_demo.json"),
        "--set",
        "n_samples=20000",
        "--dump-rounds",
        &dump_str,
    ]);
    assert_eq!(code, 0);
    let stats: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in [
        "n_samples",
        "n_accepted",
        "pa_hat",
        "pa_stderr",
        "mse_mean_hat",
        "mse_stderr",
        "interior_fraction",
        "orthogonality_residuals",
    ] {
        assert!(stats.get(key).is_some(), "missing field {key}");
    }
    assert_eq!(stats["n_samples"], serde_json::json!(20000));
    let rounds = std::fs::read_to_string(&dump).unwrap();
    let mut lines = rounds.lines();
    assert_eq!(lines.next(), Some("u,y1,y2,accepted"));
    assert_eq!(lines.count(), 20000);
}

#[test]
fn seed_flag_changes_and_pins_the_stream() {
    let args = |seed: &'static str| {
        vec![
            "simulate".to_string(),
            config("simulate_demo.json"),
            "--set".into(),
            "n_samples=50000".into(),
            "--seed".into(),
            seed.into(),
        ]
    };
    let go = |a: Vec<String>| {
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        run_to_string(&refs).1
    };
    let a = go(args("7"));
    let b = go(args("7"));
    let c = go(args("8"));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn verify_passes_on_the_reference_configs() {
    for cfg in ["example1.json", "example2.json", "example3.json"] {
        let (code, text) = run_to_string(&["verify", &config(cfg)]);
        let report: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(code, 0, "verify failed for {cfg}: {report}");
        assert_eq!(report["all_pass"], serde_json::json!(true));
        assert_eq!(report["checks"].as_array().unwrap().len(), 4);
    }
}

#[test]
fn tabulated_noise_csv_resolves_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("density.csv"), "0.0,0.5\n1.0,0.5\n").unwrap();
    let cfg = dir.path().join("synth.json");
    std::fs::write(
        &cfg,
        r#"{
            "delta": 1.0,
            "honest_noise": {"kind": "tabulated", "csv": "density.csv"},
            "eta": 4.0,
            "alpha": 0.5
        }"#,
    )
    .unwrap();
    let (code, text) = run_to_string(&["synthesize", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "synthesize failed: {text}");
    let noise: serde_json::Value = serde_json::from_str(&text).unwrap();
    // A tabulated rendering of the uniform density reproduces its optimum.
    let z = noise["atoms"][0]["z"].as_f64().unwrap();
    assert!((z - 4.0).abs() < 1e-9, "z = {z}");
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    // Missing config file.
    assert_eq!(run(&["solve", "/nonexistent/config.json"]), 1);
    // Config violating the schema.
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"delta\": 1.0}").unwrap();
    assert_eq!(run(&["solve", bad.to_str().unwrap()]), 1);
    // Utility grammar error, injected through an override.
    assert_eq!(
        run(&[
            "solve",
            &config("example1.json"),
            "--set",
            "u_ad=MMSE + )",
        ]),
        1
    );
    // Monotonicity violation is a computation-stage failure.
    assert_eq!(
        run(&[
            "solve",
            &config("example1.json"),
            "--set",
            "u_ad=-MMSE + PA",
        ]),
        2
    );
    // Both a positional config and --config is ambiguous.
    assert_eq!(
        run(&[
            "solve",
            &config("example1.json"),
            "--config",
            &config("example1.json"),
        ]),
        1
    );
    // No config at all.
    assert_eq!(run(&["solve"]), 1);
}
