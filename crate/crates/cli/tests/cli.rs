use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use btgd::Trajectory;
use serde_json::Value;
use tempfile::TempDir;

fn btgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_btgd")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_in(dir: &TempDir, sub: &str, config: &str, extra: &[&str]) -> (Output, std::path::PathBuf) {
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), config);
    let mut args = vec![sub, "--config", &cfg, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (btgd(&args), out)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

const SQUARE: &str = r#"{
    "function": {"name": "quadratic", "matrix": [[2.0]]},
    "optimizer": {"name": "backtracking_gd"},
    "z0": {"point": [1.0]}
}"#;

#[test]
fn square_converges_in_one_step() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(&dir, "run", SQUARE, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let records = Trajectory::records_from_csv(fs::File::open(out.join("trajectory.csv")).unwrap()).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0].point.coords(), &[1.0]);
    assert_eq!(records[1].point.coords(), &[0.0]);
    assert_eq!(records[0].step_size, 0.5);

    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["termination"], "Converged");
    assert_eq!(summary["convergence"]["termination"], "Converged");
    assert_eq!(summary["convergence"]["limit_class"]["kind"], "Minimum");
    assert!(summary["stabilization"]["stabilized"].is_boolean());
}

#[test]
fn malformed_config_exits_2_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    for bad in ["{not json", r#"{"function": {"name": "cubic"}, "mystery": 1}"#, r#"{"function": {"name": "nope"}}"#] {
        let (o, out) = run_in(&dir, "run", bad, &[]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
        assert!(!out.exists(), "{bad}");
    }
}

#[test]
fn unknown_names_on_the_command_line_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = btgd(&["run", "--function", "banana", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("banana"));
    let o = btgd(&["run", "--function", "cubic", "--optimizer", "adam", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn invalid_parameters_exit_2() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"function": {"name": "cubic"}, "optimizer": {"name": "backtracking_gd",
        "line_search": {"alpha": 1.5}}, "z0": {"point": [1.0]}}"#;
    let (o, out) = run_in(&dir, "run", cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn non_finite_run_exits_3_with_outputs_flushed() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"function": {"name": "quadratic", "matrix": [[2.0]]},
        "optimizer": {"name": "standard_gd", "delta": 10.0}, "z0": {"point": [1.0]},
        "stop": {"divergence_radius": 1.7e308}}"#;
    let (o, out) = run_in(&dir, "run", cfg, &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("trajectory.csv").exists());
    assert_eq!(json(&out.join("summary.json"))["non_finite"], true);
}

#[test]
fn compare_oscillation_example() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{
        "function": {"name": "smoothed_abs"},
        "optimizers": [{"name": "standard_gd", "delta": 1.0}, {"name": "backtracking_gd"}],
        "z0": {"point": [0.5]},
        "stop": {"max_iters": 1000}
    }"#;
    let (o, out) = run_in(&dir, "compare", cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&out.join("compare.csv"));
    assert_eq!(header, ["optimizer", "termination", "final_value", "grad_norm", "iterations", "func_evals"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "standard_gd");
    assert_eq!(rows[0][1], "MaxIters");
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), 1.0);
    assert_eq!(rows[1][0], "backtracking_gd");
    assert_eq!(rows[1][1], "Converged");
}

#[test]
fn compare_repeated_optimizer_gives_identical_rows() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = btgd(&[
        "compare",
        "--function",
        "rosenbrock",
        "--optimizer",
        "two_way_gd",
        "--optimizer",
        "two_way_gd",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = csv_rows(&out.join("compare.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], rows[1]);
}

#[test]
fn compare_needs_two_optimizers() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(&dir, "compare", r#"{"function": {"name": "cubic"}}"#, &["--optimizer", "two_way_gd"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn identical_configs_reproduce_bytes() {
    let cfg = r#"{"function": {"name": "mexican_hat"}, "optimizer": {"name": "two_way_gd"},
        "z0": {"ball": {"radius": 0.5, "center": [0.5, 0.0]}}, "seed": 11, "stop": {"max_iters": 300}}"#;
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let (oa, out_a) = run_in(&a, "run", cfg, &[]);
    let (ob, out_b) = run_in(&b, "run", cfg, &[]);
    assert!(oa.status.success() && ob.status.success());
    for name in ["trajectory.csv", "summary.json"] {
        assert_eq!(fs::read(out_a.join(name)).unwrap(), fs::read(out_b.join(name)).unwrap(), "{name}");
    }
    // A different seed draws a different start.
    let (_, out_c) = run_in(&b, "run", cfg, &["--seed", "12"]);
    assert_ne!(fs::read(out_a.join("trajectory.csv")).unwrap(), fs::read(out_c.join("trajectory.csv")).unwrap());
}

#[test]
fn trajectory_csv_round_trips_exactly() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"function": {"name": "rosenbrock"}, "optimizer": {"name": "backtracking_nag"},
        "z0": {"point": [-1.2, 1.0]}, "stop": {"max_iters": 200}}"#;
    let (o, out) = run_in(&dir, "run", cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let records = Trajectory::records_from_csv(text.as_bytes()).unwrap();
    assert_eq!(records.len(), 201);

    // Re-serializing the parsed records reproduces the file byte for byte.
    let rebuilt = Trajectory {
        records,
        termination: btgd::Termination::MaxIters,
        non_finite: false,
        armijo_violations: vec![],
        direction_checks: vec![],
        notes: vec![],
    };
    assert_eq!(rebuilt.to_csv_string(), text);
}

#[test]
fn saddle_mc_fraction_on_the_canonical_saddle() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"function": {"name": "quadratic", "matrix": [[1.0, 0.0], [0.0, -1.0]]},
        "saddle": {"eps": 0.1, "n_samples": 1000}, "seed": 3}"#;
    let (o, out) = run_in(&dir, "saddle-mc", cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&out.join("saddle_mc.json"));
    assert!(summary["fraction"].as_f64().unwrap() >= 0.99);
    let (header, rows) = csv_rows(&out.join("saddle_mc.csv"));
    assert_eq!(header, ["index", "start_0", "start_1", "escaped", "min_distance", "termination", "iterations"]);
    assert_eq!(rows.len(), 1000);
    let escaped = rows.iter().filter(|r| r[3] == "true").count();
    assert_eq!(escaped as u64, summary["escaped"].as_u64().unwrap());
    assert!(rows.iter().enumerate().all(|(i, r)| r[0] == i.to_string()));
}

#[test]
fn saddle_mc_rejects_a_minimum() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"function": {"name": "quadratic", "matrix": [[1.0, 0.0], [0.0, 1.0]]}, "saddle": {"point": [0.0, 0.0]}}"#;
    let (o, out) = run_in(&dir, "saddle-mc", cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn stability_sweep_rows_are_stable() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(&dir, "stability-sweep", "{}", &["--seed", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = csv_rows(&out.join("stability_sweep.csv"));
    assert_eq!(header.len(), 5);
    assert_eq!(header[0], "batch_size");
    let sizes: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(sizes, ["5", "10", "25", "50"]);
    for row in &rows {
        let cells: Vec<f64> = row[1..].iter().map(|c| c.parse().unwrap()).collect();
        let max = cells.iter().cloned().fold(f64::MIN, f64::max);
        let min = cells.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 2.0, "{row:?}");
    }
    let summary = json(&out.join("stability_sweep.json"));
    assert_eq!(summary["rescaled_sigma"].as_array().unwrap().len(), 4);
}

#[test]
fn lr_finder_with_full_batches_has_zero_variance() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(&dir, "lr-finder", r#"{"finder": {"batch_size": 100, "n_batches": 7}}"#, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&out.join("lr_finder.json"));
    assert_eq!(summary["batch_variance"].as_f64().unwrap(), 0.0);
    let sigmas = summary["report"]["per_batch_sigmas"].as_array().unwrap();
    assert_eq!(sigmas.len(), 7);
    assert!(sigmas.iter().all(|s| s == &sigmas[0]));
    assert_eq!(summary["report"]["rho"].as_f64().unwrap(), 1.0);
}

#[test]
fn lr_finder_rejects_oversized_batches() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(&dir, "lr-finder", r#"{"finder": {"batch_size": 101}}"#, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn flags_override_the_config() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(&dir, "run", SQUARE, &["--function", "cubic", "--z0", "-0.5", "--optimizer", "two_way_gd"]);
    // x³ has no lower bound, so the run leaves through the divergence radius.
    assert!(o.status.code() == Some(0) || o.status.code() == Some(3));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["function"]["name"], "cubic");
    assert_eq!(summary["optimizer"]["name"], "two_way_gd");
    assert_eq!(summary["z0"], serde_json::json!([-0.5]));
}
