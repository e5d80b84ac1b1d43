use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn evfair(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_evfair"));
    for var in ["EVFAIR_METHOD", "EVFAIR_GAP_TOL", "EVFAIR_NODE_LIMIT", "EVFAIR_TOL"] {
        cmd.env_remove(var);
    }
    cmd.args(args).output().expect("spawn evfair")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// 6 EVs over 12 two-hour slots.
fn small(dir: &Path, name: &str, seed: &str) -> String {
    let out = p(dir, name);
    let o = evfair(&[
        "generate",
        "--case",
        "residential",
        "--seed",
        seed,
        "--n-fixed",
        "3",
        "--n-random",
        "3",
        "--slot-hours",
        "2",
        "-o",
        &out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn generate_is_deterministic_per_seed() {
    let d = tempfile::tempdir().unwrap();
    let a = std::fs::read(small(d.path(), "a.json", "4")).unwrap();
    let b = std::fs::read(small(d.path(), "b.json", "4")).unwrap();
    let c = std::fs::read(small(d.path(), "c.json", "5")).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn solve_then_verify_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let s = small(d.path(), "s.json", "2");
    let run = p(d.path(), "run.json");
    let costs = p(d.path(), "costs.csv");
    let o = evfair(&["solve", &s, "--method", "exact", "-o", &run, "--costs-csv", &costs]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let art: Value = serde_json::from_str(&std::fs::read_to_string(&run).unwrap()).unwrap();
    assert_eq!(art["record"]["status"], "optimal");
    assert_eq!(art["record"]["solver"]["method"], "exact");
    let csv = std::fs::read_to_string(&costs).unwrap();
    assert!(csv.starts_with("ev_id,grid_cost,degradation_cost,v2g_revenue,total_cost"));
    assert_eq!(csv.lines().count(), 6 + 2);

    assert_eq!(code(&evfair(&["verify", &run, &s])), 0);

    // push one SOC entry far off its trajectory
    let mut bad = art.clone();
    let soc = &mut bad["schedule"]["evs"][0]["soc_kwh"][0];
    *soc = Value::from(soc.as_f64().unwrap() + 5.0);
    let bad_path = p(d.path(), "bad.json");
    std::fs::write(&bad_path, serde_json::to_string(&bad).unwrap()).unwrap();
    let o = evfair(&["verify", &bad_path, &s]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn verify_rejects_a_different_scenario() {
    let d = tempfile::tempdir().unwrap();
    let s = small(d.path(), "s.json", "2");
    let other = small(d.path(), "t.json", "3");
    let run = p(d.path(), "run.json");
    assert_eq!(code(&evfair(&["solve", &s, "-o", &run])), 0);
    assert_eq!(code(&evfair(&["verify", &run, &other])), 3);
}

#[test]
fn solve_without_out_prints_json() {
    let d = tempfile::tempdir().unwrap();
    let s = small(d.path(), "s.json", "6");
    let o = evfair(&["solve", &s, "--mode", "charging-only"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["record"]["mode"], "charging_only");
    assert_eq!(v["fairness"]["participant_count"], 0);
}

#[test]
fn missing_scenario_is_an_input_error() {
    let o = evfair(&["solve", "/nonexistent/scenario.json"]);
    assert_eq!(code(&o), 3);
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["exit_code"], 3);
}

#[test]
fn bad_env_method_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let s = small(d.path(), "s.json", "1");
    let o = Command::new(env!("CARGO_BIN_EXE_evfair"))
        .env("EVFAIR_METHOD", "simplex")
        .args(["solve", &s])
        .output()
        .unwrap();
    assert_ne!(code(&o), 0);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let o = evfair(&["generate", "--case", "shopping", "-o", "/nonexistent/dir/s.json"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/dir/s.json"));
}

#[test]
fn sweep_writes_rows_in_order_and_repeats_exactly() {
    let d = tempfile::tempdir().unwrap();
    let s = small(d.path(), "s.json", "8");
    let run = |name: &str| {
        let out = p(d.path(), name);
        let o = evfair(&[
            "sweep",
            &s,
            "--param",
            "zbar",
            "--range",
            "0:6:2",
            "--omit-timing",
            "-o",
            &out,
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some("threshold,total_cost,jfi,rel_gap"));
    let thresholds: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(thresholds, vec![0.0, 2.0, 4.0, 6.0]);
}

#[test]
fn budget_sweep_requires_companion() {
    let d = tempfile::tempdir().unwrap();
    let s = small(d.path(), "s.json", "8");
    let o = evfair(&[
        "sweep",
        &s,
        "--param",
        "theta",
        "--range",
        "0:2:1",
        "-o",
        &p(d.path(), "x.csv"),
    ]);
    assert_eq!(code(&o), 3);
}
