//! End-to-end tests of the `iar` binary: exit codes, output formats,
//! seed determinism and the shipped experiment configs.

use std::path::Path;
use std::process::{Command, Output};

use iar::experiments::TableConfig;

fn iar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iar"))
        .args(args)
        .env("IAR_THREADS", "2")
        .output()
        .expect("spawn iar")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

#[test]
fn simulate_writes_csv_to_stdout() {
    let out = iar(&["simulate", "--phi", "0.5", "--n", "25", "--gaps", "regular:1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines[0], "time,value");
    assert_eq!(lines.len(), 26);
    for line in &lines[1..] {
        let (t, v) = line.split_once(',').expect("two columns");
        t.parse::<f64>().expect("time parses");
        v.parse::<f64>().expect("value parses");
    }
}

#[test]
fn simulate_is_byte_identical_for_equal_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = iar(&[
            "simulate", "--phi", "0.7", "--n", "100", "--gaps", "unif:0.5,1.5",
            "--seed", "42", "--out", path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = dir.path().join("c.csv");
    let out = iar(&[
        "simulate", "--phi", "0.7", "--n", "100", "--gaps", "unif:0.5,1.5",
        "--seed", "43", "--out", c.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn gen_times_regular_grid() {
    let out = iar(&["gen-times", "--gaps", "regular:2", "--n", "4"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "time\n0\n2\n4\n6\n");
}

#[test]
fn fit_batch_reports_plausible_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("series.csv");
    let out = iar(&[
        "simulate", "--phi", "0.6", "--n", "400", "--gaps", "regular:1",
        "--seed", "3", "--out", series.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = iar(&["fit-batch", "--in", series.to_str().unwrap()]);
    assert!(out.status.success());
    let fit: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("json");
    let phi = fit["phi_hat"].as_f64().expect("phi_hat");
    assert!(phi > 0.0 && phi < 1.0, "phi_hat {phi}");
    assert!((phi - 0.6).abs() < 0.15, "phi_hat {phi} far from 0.6");
    assert!(fit["converged"].as_bool().unwrap());
}

#[test]
fn fit_online_reports_estimate_and_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("series.csv");
    let traj = dir.path().join("traj.csv");
    let out = iar(&[
        "simulate", "--phi", "0.5", "--n", "200", "--gaps", "gamma:3,3",
        "--seed", "9", "--out", series.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = iar(&[
        "fit-online", "--in", series.to_str().unwrap(), "--method", "obr",
        "--out", traj.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).expect("json");
    let phi = report["final_phi"].as_f64().expect("final_phi");
    assert!(phi > 0.0 && phi < 1.0, "final_phi {phi}");
    assert!(report["online_mse"].as_f64().expect("mse") > 0.0);
    assert_eq!(report["warm_count"].as_u64(), Some(100));

    let body = std::fs::read_to_string(&traj).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next(), Some("time,value,phi_estimate,prediction"));
    assert_eq!(lines.count(), 200);
}

#[test]
fn usage_errors_exit_2_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("never.csv");
    // unknown flag
    let out = iar(&["simulate", "--phi", "0.5", "--n", "10", "--bogus", "1"]);
    assert_eq!(out.status.code(), Some(2));
    // domain error caught before any output is produced
    let out = iar(&[
        "simulate", "--phi", "1.5", "--n", "10", "--gaps", "regular:1",
        "--out", out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_path.exists());
    // malformed gap spec
    let out = iar(&["gen-times", "--gaps", "weibull:1,2", "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let out = iar(&["fit-batch", "--in", "/nonexistent/series.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn experiment_writes_summary_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
            "n": 60, "reps": 3,
            "gap_specs": [{ "kind": "regular", "gap": 1.0 }],
            "scenario": { "kind": "sanity_check", "phi": 0.5 }
        }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("results");
    let out = iar(&[
        "experiment", "--config", config.to_str().unwrap(),
        "--out-dir", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next(),
        Some(
            "gap_spec,phi_final_mle,phi_final_obr,phi_final_ogd,phi_final_ons,\
             mse_mle,mse_obr,mse_ogd,mse_ons,\
             seconds_mle,seconds_obr,seconds_ogd,seconds_ons"
        )
    );
    assert_eq!(lines.count(), 1);
    assert!(out_dir.join("trajectory_regular_1.csv").exists());
}

#[test]
fn bench_writes_timing_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("bench.csv");
    let out = iar(&[
        "bench", "--sizes", "20:40:20", "--reps", "2",
        "--out", out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let body = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = body.trim().lines().collect();
    assert_eq!(lines[0], "n,method,mean_seconds");
    assert_eq!(lines.len(), 9); // 2 sizes x 4 methods
}

#[test]
fn preprocess_round_trips_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.csv");
    let mut body = String::from("time,value\n");
    for i in 0..60 {
        let t = i as f64 * 0.5;
        body.push_str(&format!("{t},{}\n", 3.0 + 0.2 * t + (t * 1.7).sin()));
    }
    std::fs::write(&input, body).unwrap();
    let output = dir.path().join("clean.csv");
    let out = iar(&[
        "preprocess", "--in", input.to_str().unwrap(),
        "--out", output.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let clean = std::fs::read_to_string(&output).unwrap();
    let lines: Vec<&str> = clean.trim().lines().collect();
    assert_eq!(lines[0], "time,value");
    assert_eq!(lines.len(), 61);
    // standardized output: sample sd of the values is 1
    let values: Vec<f64> =
        lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    assert!((var.sqrt() - 1.0).abs() < 1e-8, "sd {}", var.sqrt());
}

#[test]
fn shipped_configs_are_valid() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(configs).expect("configs directory") {
        let path = entry.unwrap().path();
        if path.extension().map_or(false, |e| e == "json") {
            let text = std::fs::read_to_string(&path).unwrap();
            let table: TableConfig =
                serde_json::from_str(&text).unwrap_or_else(|e| panic!("{path:?}: {e}"));
            assert_eq!(table.experiments().unwrap().len(), 4, "{path:?}");
            seen += 1;
        }
    }
    assert_eq!(seen, 3);
}
