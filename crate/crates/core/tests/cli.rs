use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hydro_ldr::fixtures;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hydro-ldr"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("HYDRO_LDR_SOLVER", "simplex").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// A small stochastic variant of the micro system in its own directory.
fn project(dir: &Path) -> PathBuf {
    let (system, _, _) = fixtures::sources("micro").unwrap();
    std::fs::write(dir.join("system.toml"), system).unwrap();
    std::fs::write(
        dir.join("scenarios.toml"),
        "ar_coefficient = 0.3\n\n[[reservoir]]\nname = \"H1\"\n\
         mean = [10.0, 6.0, 10.0, 6.0, 10.0, 6.0, 10.0, 6.0, 10.0, 6.0, 10.0, 6.0]\n\
         std = [3.0, 2.0, 3.0, 2.0, 3.0, 2.0, 3.0, 2.0, 3.0, 2.0, 3.0, 2.0]\n",
    )
    .unwrap();
    let config = dir.join("run.toml");
    std::fs::write(
        &config,
        "system = \"system.toml\"\nscenarios = \"scenarios.toml\"\nn_in = 8\nn_out = 12\nseed = 3\n\
         out = \"out\"\ngrid = [0.0, 1.0, 100.0]\n\n[basis]\nmax_degree = 2\nmax_lag = 1\n\n\
         [stt]\ncentral_window = [1, 2]\n",
    )
    .unwrap();
    config
}

fn csv_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn estimate_writes_policy_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let config = project(dir.path());
    ok(&["estimate", "--config", config.to_str().unwrap(), "--lambda", "0"]);
    let out = dir.path().join("out");
    assert!(out.join("theta_l0.csv").exists());
    let log = std::fs::read_to_string(out.join("estimation_log.jsonl")).unwrap();
    let record: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert!(record["nonzero_count"].is_u64());
}

#[test]
fn positive_lambda_estimates_the_baseline_first() {
    let dir = tempfile::tempdir().unwrap();
    let config = project(dir.path());
    ok(&["estimate", "--config", config.to_str().unwrap(), "--lambda", "1e3"]);
    let out = dir.path().join("out");
    assert!(out.join("theta_l0.csv").exists());
    assert!(out.join("theta_l1000.csv").exists());
}

#[test]
fn malformed_system_names_the_section() {
    let dir = tempfile::tempdir().unwrap();
    let config = project(dir.path());
    let broken = std::fs::read_to_string(dir.path().join("system.toml"))
        .unwrap()
        .replace("v_max = 100.0\n", "");
    std::fs::write(dir.path().join("system.toml"), broken).unwrap();
    let out = run(&["estimate", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("hydro") && err.contains("v_max"), "{err}");
}

#[test]
fn simulate_from_scenario_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let config = project(dir.path());
    let cfg = config.to_str().unwrap();
    ok(&["gen-scenarios", "--config", cfg]);
    ok(&["estimate", "--config", cfg]);

    // Two out-of-sample scenarios from a hand-written CSV, history included.
    let generated = std::fs::read_to_string(dir.path().join("out/scenarios_out.csv")).unwrap();
    let kept: Vec<&str> = generated
        .lines()
        .filter(|l| {
            let mut f = l.split(',');
            let s = f.next().unwrap();
            s == "scenario" || s == "0" || s == "1" || s == "2"
        })
        .collect();
    std::fs::write(dir.path().join("two.csv"), kept.join("\n") + "\n").unwrap();
    let csv_config = dir.path().join("csv.toml");
    std::fs::write(
        &csv_config,
        "system = \"system.toml\"\nin_sample = \"out/scenarios_in.csv\"\nout_of_sample = \"two.csv\"\n\
         out = \"out\"\n\n[basis]\nmax_degree = 2\nmax_lag = 1\n",
    )
    .unwrap();
    ok(&["simulate", "--config", csv_config.to_str().unwrap()]);
    assert_eq!(csv_rows(&dir.path().join("out/summary_theta_l0.csv")), 2);
}

#[test]
fn missing_policy_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = project(dir.path());
    let out = run(&["simulate", "--config", config.to_str().unwrap(), "--policy", "nope.csv"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn sweep_report_and_selection() {
    let dir = tempfile::tempdir().unwrap();
    let config = project(dir.path());
    let cfg = config.to_str().unwrap();
    ok(&["sweep", "--config", cfg, "--jobs", "1"]);
    let out = dir.path().join("out");
    let table = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert_eq!(table.lines().filter(|l| l.ends_with(",true")).count(), 1);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert!(report["gain"].as_f64().unwrap() >= 0.0);

    // The selected policy never loses to the baseline out of sample.
    let selected = report["selected_lambda"].as_f64().unwrap();
    let base = ok(&["simulate", "--config", cfg, "--lambda", "0"]);
    let best = ok(&["simulate", "--config", cfg, "--lambda", &selected.to_string()]);
    let mean = |s: &str| -> f64 {
        s.split("mean cost ").nth(1).unwrap().split(',').next().unwrap().parse().unwrap()
    };
    assert!(mean(&best) <= mean(&base), "{best} vs {base}");

    ok(&["report", "--run-dir", out.to_str().unwrap()]);
    let consolidated: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(consolidated["entries"].as_array().unwrap().len(), 3);
    assert!(consolidated["sweep"].is_object());
    assert_eq!(csv_rows(&out.join("report_sparsity.csv")), 3);
}

#[test]
fn zero_only_grid_has_zero_gain() {
    let dir = tempfile::tempdir().unwrap();
    let config = project(dir.path());
    let stdout = ok(&["sweep", "--config", config.to_str().unwrap(), "--grid", "0"]);
    assert!(stdout.contains("gain 0.0000"), "{stdout}");
}

#[test]
fn report_on_empty_and_single_lambda_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = run(&["report", "--run-dir", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let config = project(dir.path());
    let cfg = config.to_str().unwrap();
    ok(&["estimate", "--config", cfg]);
    ok(&["simulate", "--config", cfg]);
    let run_dir = dir.path().join("out");
    ok(&["report", "--run-dir", run_dir.to_str().unwrap()]);
    assert_eq!(csv_rows(&run_dir.join("report_costs.csv")), 1);
    assert_eq!(csv_rows(&run_dir.join("report_spot.csv")), 1);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = project(dir.path());
    let cfg = config.to_str().unwrap();
    let read = |name: &str| std::fs::read(dir.path().join("out").join(name)).unwrap();

    ok(&["gen-scenarios", "--config", cfg]);
    let first = (read("scenarios_in.csv"), read("scenarios_out.csv"));
    ok(&["gen-scenarios", "--config", cfg]);
    assert_eq!(first, (read("scenarios_in.csv"), read("scenarios_out.csv")));

    ok(&["estimate", "--config", cfg]);
    ok(&["simulate", "--config", cfg]);
    ok(&["report", "--run-dir", dir.path().join("out").to_str().unwrap()]);
    let tables = (read("summary_theta_l0.csv"), read("report_costs.csv"), read("report_spot.csv"));
    ok(&["simulate", "--config", cfg]);
    ok(&["report", "--run-dir", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(tables, (read("summary_theta_l0.csv"), read("report_costs.csv"), read("report_spot.csv")));
}

#[test]
fn seed_flag_changes_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let config = project(dir.path());
    let cfg = config.to_str().unwrap();
    ok(&["gen-scenarios", "--config", cfg]);
    let a = std::fs::read(dir.path().join("out/scenarios_in.csv")).unwrap();
    ok(&["gen-scenarios", "--config", cfg, "--seed", "4"]);
    let b = std::fs::read(dir.path().join("out/scenarios_in.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn fixture_configs_resolve() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("micro");
    ok(&["estimate", "--config", "fixture:micro", "--out", out.to_str().unwrap()]);
    assert!(out.join("theta_l0.csv").exists());
    let bad = run(&["estimate", "--config", "fixture:case9"]);
    assert_eq!(bad.status.code(), Some(2));
}
