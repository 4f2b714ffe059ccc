use std::fs;
use std::path::Path;

use meanfield_cli::config::{load_str, to_pretty_json};
use meanfield_cli::{
    execute, read_artifact, Invocation, Pipeline, EXIT_DIVERGED, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_VALIDATION,
};

const STRAIGHT_LINE: &str = r#"{
  "model": {"family": "linearInteraction", "a": [[0]], "b": [[0]], "c": [0], "sigma0": [[1]], "declaredL": 1},
  "init": {"kind": "dirac", "at": [0]},
  "sim": {"tEnd": 1, "steps": 32},
  "rate": {"targets": [{"terminalMean": [2]}], "particles": 8}
}"#;

fn run(pipeline: Pipeline, dir: &Path, config: Option<&str>, overrides: &[&str]) -> meanfield_cli::Outcome {
    let path = dir.join("config.json");
    if let Some(text) = config {
        fs::write(&path, text).unwrap();
    }
    execute(
        pipeline,
        &Invocation {
            config: config.map(|_| path.clone()),
            overrides: overrides.iter().map(|s| s.to_string()).collect(),
            out_dir: Some(dir.join("out")),
            seed_env: None,
        },
    )
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn validate_accepts_linear_interaction_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(Pipeline::Validate, dir.path(), Some(STRAIGHT_LINE), &[]);
    assert_eq!(out.code, EXIT_OK, "{}", out.message);
    let report = read_artifact(&dir.path().join("out"), "validation-report.txt").unwrap();
    assert!(report.contains("passed = true"));
    for name in ["resolved-config.json", "run-manifest.json"] {
        assert!(dir.path().join("out").join(name).exists());
    }
}

#[test]
fn straight_line_rate_matches_analytic_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(Pipeline::Rate, dir.path(), Some(STRAIGHT_LINE), &[]);
    assert_eq!(out.code, EXIT_OK, "{}", out.message);
    let rows = csv_rows(&read_artifact(&dir.path().join("out"), "rate.csv").unwrap());
    let cost: f64 = rows[0][1].parse().unwrap();
    // |Δ|² / (2T) with Δ = 2, T = 1
    assert!((cost - 2.0).abs() <= 0.02 * 2.0, "{cost}");
}

#[test]
fn resolved_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(Pipeline::Validate, dir.path(), Some(STRAIGHT_LINE), &["sim.n=12"]);
    assert_eq!(out.code, EXIT_OK, "{}", out.message);
    let first = read_artifact(&dir.path().join("out"), "resolved-config.json").unwrap();
    let again = to_pretty_json(&load_str(&first, &[]).unwrap());
    assert_eq!(first, again);

    let dir2 = tempfile::tempdir().unwrap();
    let out = run(Pipeline::Validate, dir2.path(), Some(&first), &[]);
    assert_eq!(out.code, EXIT_OK);
    let second = read_artifact(&dir2.path().join("out"), "resolved-config.json").unwrap();
    // only the output directory differs between the two runs
    let strip = |s: &str| s.lines().filter(|l| !l.contains("\"output\"")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&first), strip(&second));
}

#[test]
fn config_errors_exit_with_validation_code_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(Pipeline::Simulate, dir.path(), Some("{\n \"sim\": {\"n\": -3}\n}"), &[]);
    assert_eq!(out.code, EXIT_VALIDATION);
    assert!(out.message.contains("sim.n") && out.message.contains("line 2"), "{}", out.message);

    let out = run(Pipeline::Simulate, dir.path(), None, &["sim.steps=0"]);
    assert_eq!(out.code, EXIT_VALIDATION);
    assert!(out.message.contains("`sim`"), "{}", out.message);

    let out = run(Pipeline::Scan, dir.path(), None, &["init={\"kind\":\"points\",\"dim\":1,\"points\":[0,1]}"]);
    assert_eq!(out.code, EXIT_VALIDATION);
    assert!(out.message.contains("init.kind"), "{}", out.message);
}

#[test]
fn failing_lipschitz_check_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(Pipeline::Validate, dir.path(), None, &["model.declaredL=0.1"]);
    assert_eq!(out.code, EXIT_VALIDATION);
    assert!(out.message.contains("model.declaredL"));
    let report = read_artifact(&dir.path().join("out"), "validation-report.txt").unwrap();
    assert!(report.contains("passed = false"));
}

#[test]
fn divergence_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        Pipeline::Simulate,
        dir.path(),
        None,
        &["model.a=[[1000]]", "model.declaredL=1001", "sim.steps=10"],
    );
    assert_eq!(out.code, EXIT_DIVERGED, "{}", out.message);
}

#[test]
fn stalled_optimizer_exits_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        Pipeline::Rate,
        dir.path(),
        Some(STRAIGHT_LINE),
        &["rate.maxIterations=1", "rate.restarts=1"],
    );
    assert_eq!(out.code, EXIT_NOT_CONVERGED, "{}", out.message);
    assert!(read_artifact(&dir.path().join("out"), "rate.csv").unwrap().contains("false"));
}

#[test]
fn seed_environment_changes_draws_and_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let base = run(Pipeline::Simulate, dir.path(), None, &[]);
    assert_eq!(base.code, EXIT_OK);
    let a = read_artifact(&dir.path().join("out"), "marginals.csv").unwrap();
    let out = execute(
        Pipeline::Simulate,
        &Invocation {
            out_dir: Some(dir.path().join("env")),
            seed_env: Some("17".into()),
            ..Default::default()
        },
    );
    assert_eq!(out.code, EXIT_OK);
    let b = read_artifact(&dir.path().join("env"), "marginals.csv").unwrap();
    assert_ne!(a, b);
    let manifest = read_artifact(&dir.path().join("env"), "run-manifest.json").unwrap();
    assert!(manifest.contains("\"masterSeed\": 17") && manifest.contains("MEANFIELD_SEED"));
    let resolved = read_artifact(&dir.path().join("env"), "resolved-config.json").unwrap();
    assert!(resolved.contains("\"masterSeed\": 17"));
}

#[test]
fn every_pipeline_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    let small = ["sim.n=16", "sim.steps=16", "laplace.replicas=32", "rate.particles=16"];
    for (p, file) in [
        (Pipeline::Simulate, "marginals.csv"),
        (Pipeline::Limit, "residual.csv"),
        (Pipeline::Current, "current.csv"),
        (Pipeline::Laplace, "laplace.csv"),
    ] {
        let out = run(p, dir.path(), None, &small);
        assert_eq!(out.code, EXIT_OK, "{}: {}", p.name(), out.message);
        let text = read_artifact(&dir.path().join("out"), file).unwrap();
        assert!(text.lines().count() >= 2, "{file}");
        assert!(out.artifacts.iter().any(|a| a == file));
    }
}

#[test]
fn default_scan_reports_every_n_with_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(Pipeline::Scan, dir.path(), None, &[]);
    assert_eq!(out.code, EXIT_OK, "{}", out.message);
    let text = read_artifact(&dir.path().join("out"), "scan.csv").unwrap();
    assert!(text.starts_with("N,epsilon,aN,laplace,laplaceSE,bound,boundSE,control,seed,holds,tightens,limitF"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 6);
    for n in ["32", "128", "512"] {
        let for_n: Vec<_> = rows.iter().filter(|r| r[0] == n).collect();
        assert_eq!(for_n.len(), 2);
        assert!(for_n.iter().all(|r| r[9] == "true"));
    }
}
