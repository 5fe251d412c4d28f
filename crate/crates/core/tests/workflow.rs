mod common;

use std::fs;
use std::process::Command;

use common::*;
use multiquery::models::JobStatus;
use multiquery::workflow::{
    build_plan, load_config, read_results, run, run_config_file, NodeKind, RunOverrides, OUTPUTS_FILE,
    SAMPLES_FILE,
};

#[test]
fn grid_study_with_failing_corner() {
    let dir = tempfile::tempdir().unwrap();
    let artifact = run_config_file(grid_config(dir.path(), 4), &RunOverrides::default()).unwrap();
    assert_eq!(artifact.samples.rows.len(), 100);
    let mut failed = 0;
    for (k, row) in artifact.samples.rows.iter().enumerate() {
        let (a, b) = (row[0], row[1]);
        if a >= 0.7 && b >= 0.7 {
            assert_eq!(artifact.statuses[k], JobStatus::Failed);
            assert!(artifact.outputs[k][0].is_nan());
            failed += 1;
        } else {
            assert_eq!(artifact.statuses[k], JobStatus::Completed);
            assert_eq!(artifact.outputs[k][0], a + b);
        }
    }
    // levels k/9 with k ≥ 7 (0.7 rounds just below 7/9 = 0.777…)
    assert_eq!(failed, 9);
    assert_eq!(artifact.meta.status_counts.failed, 9);

    let out = dir.path().join("out");
    assert_eq!(fs::read_to_string(out.join(SAMPLES_FILE)).unwrap().lines().count(), 101);
    assert_eq!(fs::read_to_string(out.join(OUTPUTS_FILE)).unwrap().lines().count(), 101);
    let status = fs::read_to_string(out.join("plot_grid_status.csv")).unwrap();
    assert_eq!(status.lines().count(), 11);
    assert_eq!(status.matches("failed").count(), 9);
    assert!(out.join("queens_run.log").is_file());
    let jobs = fs::read_dir(out.join("workspace/pool"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("job_"))
        .count();
    assert_eq!(jobs, 100);

    let back = read_results(&out).unwrap();
    assert!(back.equivalent(&artifact));
}

#[test]
fn identical_seed_gives_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_config_file(mc_config(dir.path(), 7, "run1"), &RunOverrides::default()).unwrap();
    let b = run_config_file(mc_config(dir.path(), 7, "run2"), &RunOverrides::default()).unwrap();
    let c = run_config_file(mc_config(dir.path(), 8, "run3"), &RunOverrides::default()).unwrap();
    let bytes = |d: &str| fs::read(dir.path().join(d).join(SAMPLES_FILE)).unwrap();
    assert_eq!(bytes("run1"), bytes("run2"));
    assert_ne!(bytes("run1"), bytes("run3"));
    assert_eq!(a.outputs, b.outputs);
    assert_eq!(a.method_results, b.method_results);
    assert_ne!(a.samples, c.samples);
}

#[test]
fn seed_override_changes_the_stream() {
    let dir = tempfile::tempdir().unwrap();
    let path = mc_config(dir.path(), 7, "base");
    let a = run_config_file(&path, &RunOverrides::default()).unwrap();
    let b = run_config_file(
        &path,
        &RunOverrides {
            seed: Some(99),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(b.meta.seed, 99);
    assert_ne!(a.samples, b.samples);
}

fn calibration_files(dir: &std::path::Path) -> std::path::PathBuf {
    write(
        dir,
        "poly.tmpl",
        "mock_model = poly\nmock_coords = 0.25 0.5 0.75 1.0\nE = {{ E }}\nnu = {{ nu }}\n",
    );
    // noise-free data at E = 1, nu = 0.5
    let mut obs = String::from("coord_t,value\n");
    for t in [0.25f64, 0.5, 0.75, 1.0] {
        obs.push_str(&format!("{t},{}\n", t + 0.5 * t * t));
    }
    write(dir, "obs.csv", &obs);
    let doc = format!(
        r#"{{
  "method": {{"type": "smc", "model": "gp", "particles": 300, "rejuvenation_steps": 3}},
  "gp": {{
    "type": "surrogate",
    "training": {{"model": "lik", "design": "sobol", "n": 64}},
    "restarts": 1,
    "steps": 150
  }},
  "lik": {{"type": "likelihood", "forward": "fem", "observations": "obs.csv", "noise_variance": 0.04}},
  "fem": {{"type": "driver", "executable": "{MOCK_SOLVER}", "template": "poly.tmpl", "output_dim": 4}},
  "parameters": {{
    "E": {{"type": "uniform", "lower": 0.0, "upper": 2.0}},
    "nu": {{"type": "uniform", "lower": 0.0, "upper": 1.0}}
  }},
  "global_settings": {{"run_name": "calibration", "seed": 5}}
}}"#
    );
    write(dir, "calibration.json", &doc)
}

#[test]
fn calibration_chain_plans_four_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let plan = build_plan(load_config(calibration_files(dir.path())).unwrap()).unwrap();
    let names: Vec<&str> = plan.nodes.iter().map(|n| n.name.as_str()).collect();
    assert_eq!(names, ["fem", "lik", "gp", "method"]);
    assert!(matches!(plan.nodes[0].kind, NodeKind::Driver { .. }));
    assert_eq!(plan.nodes[1].depends_on, ["fem"]);
    assert_eq!(plan.nodes[2].depends_on, ["lik"]);
    assert_eq!(plan.nodes[3].depends_on, ["gp"]);
    // planning evaluates nothing
    assert!(!dir.path().join("calibration_output").exists());
}

#[test]
fn calibration_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let artifact = run_config_file(calibration_files(dir.path()), &RunOverrides::default()).unwrap();
    assert_eq!(artifact.samples.rows.len(), 300);
    let r = &artifact.method_results;
    assert!(r["log_evidence"].as_f64().unwrap().is_finite());
    let mean: Vec<f64> = serde_json::from_value(r["posterior_mean"].clone()).unwrap();
    assert!((mean[0] - 1.0).abs() < 0.3, "{mean:?}");
    assert_eq!(artifact.meta.surrogates.len(), 1);
    assert_eq!(artifact.meta.surrogates[0].n_train, 64);
    let jobs = fs::read_dir(dir.path().join("calibration_output/workspace/default")).unwrap().count();
    assert_eq!(jobs, 64);
}

#[test]
fn missing_observation_file_fails_planning() {
    let dir = tempfile::tempdir().unwrap();
    let path = calibration_files(dir.path());
    fs::remove_file(dir.path().join("obs.csv")).unwrap();
    assert!(build_plan(load_config(path).unwrap()).is_err());
}

#[test]
fn output_dir_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = mc_config(dir.path(), 1, "x");
    let mut plan = build_plan(load_config(&path).unwrap()).unwrap();
    plan.apply_overrides(&RunOverrides {
        output_dir: Some(dir.path().join("elsewhere")),
        ..Default::default()
    });
    run(&plan).unwrap();
    assert!(dir.path().join("elsewhere").join("results.json").is_file());
}

#[test]
fn every_method_runs_on_function_models() {
    let dir = tempfile::tempdir().unwrap();
    let methods = [
        r#"{"type": "grid", "model": "sum", "points_per_axis": [3, 4]}"#,
        r#"{"type": "monte_carlo", "model": "sum", "n": 20}"#,
        r#"{"type": "latin_hypercube", "model": "sum", "n": 20}"#,
        r#"{"type": "sobol_sequence", "model": "sum", "n": 16, "skip": 1}"#,
        r#"{"type": "morris", "model": "sum", "trajectories": 5}"#,
        r#"{"type": "sobol_indices", "model": "sum", "base_samples": 64}"#,
        r#"{"type": "mc_uq", "model": "sum", "n": 50}"#,
        r#"{"type": "bmfmc", "model": "sum", "low_fidelity_model": "sum", "n_lf": 200, "n_pairs": 10, "grid_size": 256}"#,
        r#"{"type": "metropolis_hastings", "model": "sum", "steps": 200}"#,
        r#"{"type": "smc", "model": "sum", "particles": 100}"#,
        r#"{"type": "levenberg_marquardt", "model": "rosen", "x0": [-1.2, 1.0], "max_iter": 100}"#,
        r#"{"type": "adam", "model": "sphere", "step_size": 0.01, "max_iter": 50}"#,
        r#"{"type": "adamax", "model": "sphere", "max_iter": 50}"#,
        r#"{"type": "rmsprop", "model": "sphere", "max_iter": 50}"#,
    ];
    for (k, method) in methods.iter().enumerate() {
        let doc = format!(
            r#"{{
  "global_settings": {{"run_name": "m{k}", "seed": {k}}},
  "parameters": {{
    "a": {{"type": "uniform", "lower": 0.0, "upper": 1.0}},
    "b": {{"type": "uniform", "lower": 0.0, "upper": 1.0}}
  }},
  "sum": {{"type": "function", "function": "sum"}},
  "sphere": {{"type": "function", "function": "sphere"}},
  "rosen": {{"type": "function", "function": "rosenbrock_residuals"}},
  "method": {method}
}}"#
        );
        let path = write(dir.path(), &format!("m{k}.json"), &doc);
        let artifact = run_config_file(&path, &RunOverrides::default()).unwrap_or_else(|e| panic!("{method}: {e}"));
        assert!(!artifact.samples.rows.is_empty(), "{method}");
        assert!(!artifact.method_results.is_null(), "{method}");
        read_results(dir.path().join(format!("m{k}_output"))).unwrap();
    }
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = mc_config(dir.path(), 3, "cli");
    let status = |args: &[&str]| {
        Command::new(CLI)
            .args(args)
            .current_dir(dir.path())
            .output()
            .unwrap()
    };

    let validated = status(&["validate", good.to_str().unwrap()]);
    assert_eq!(validated.status.code(), Some(0));

    let ran = status(&["run", good.to_str().unwrap(), "--seed", "4", "--log-level", "warn"]);
    assert_eq!(ran.status.code(), Some(0), "{}", String::from_utf8_lossy(&ran.stderr));
    let shown = status(&["show", dir.path().join("cli").to_str().unwrap()]);
    assert_eq!(shown.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&shown.stdout).contains("seed 4"));

    let bad = write(
        dir.path(),
        "bad.json",
        &fs::read_to_string(&good).unwrap().replace("\"mc_uq\"", "\"montecarlo_typo\""),
    );
    let rejected = status(&["validate", bad.to_str().unwrap()]);
    assert_eq!(rejected.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&rejected.stderr).contains("monte_carlo"));
    assert_eq!(status(&["run", bad.to_str().unwrap()]).status.code(), Some(2));

    // every solver run crashes, so the chain has no valid start
    mock_template(dir.path(), "mock_crash = 1");
    let crash = write(
        dir.path(),
        "crash.json",
        &format!(
            r#"{{
  "global_settings": {{"run_name": "crash"}},
  "parameters": {{
    "a": {{"type": "uniform", "lower": 0.0, "upper": 1.0}},
    "b": {{"type": "uniform", "lower": 0.0, "upper": 1.0}}
  }},
  "solver": {{"type": "driver", "executable": "{MOCK_SOLVER}", "template": "input.tmpl"}},
  "method": {{"type": "metropolis_hastings", "model": "solver", "steps": 10}}
}}"#
        ),
    );
    let failed = status(&["run", crash.to_str().unwrap()]);
    assert_eq!(failed.status.code(), Some(3));
    assert!(!dir.path().join("crash_output/results.json").exists());
}
