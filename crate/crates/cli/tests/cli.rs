use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hbsolve"))
}

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../problems")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn ahba_solves_the_simplex_lp() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let lp = problem("simplex_lp.json");
    let out = run(&[
        "solve",
        "--algo",
        "ahba",
        "--eps",
        "1e-3",
        "--report",
        report.to_str().unwrap(),
        lp.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["status"], "kkt_reached");
    assert!(json["iterations"].as_u64().unwrap() > 0);
    assert!(json["inner_trials"].is_u64());
    for flag in ["eq_ok", "interior_ok", "dual_ok", "grad_ok", "compl_ok"] {
        assert_eq!(json["verdict"][flag], true, "{flag}");
    }
    assert!(json["certificate"]["x"][0].as_f64().unwrap() > 0.99);
}

#[test]
fn report_round_trips_through_check_kkt() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let qp = problem("negative_sqnorm.json");
    let out = run(&[
        "solve",
        "--algo",
        "sahba",
        "--eps",
        "1e-3",
        "--report",
        report.to_str().unwrap(),
        qp.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let stored: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let eps2 = stored["eps2_effective"].as_f64().unwrap().to_string();
    let out = run(&[
        "check-kkt",
        "--eps1",
        "1e-3",
        "--eps2",
        &eps2,
        report.to_str().unwrap(),
        qp.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let checked: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(checked, stored["verdict"]);

    // a much tighter first-order tolerance than the run guaranteed fails
    let out = run(&[
        "check-kkt",
        "--eps1",
        "1e-12",
        report.to_str().unwrap(),
        qp.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["solve", "--frobnicate", "x.json"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn infeasible_start_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(problem("simplex_lp.json"))
        .unwrap()
        .replace("[0.5, 0.5]", "[0.5, 0.501]");
    let path = dir.path().join("bad.json");
    std::fs::write(&path, text).unwrap();
    let out = run(&["solve", "--eps", "1e-3", path.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible_init"));
}

#[test]
fn iteration_cap_exits_with_two() {
    let qp = problem("convex_qp.json");
    let out = run(&[
        "solve",
        "--eps",
        "1e-6",
        "--max-iters",
        "1",
        qp.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn trace_potential_is_nonincreasing() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    let qp = problem("convex_qp.json");
    let out = run(&[
        "solve",
        "--eps",
        "1e-4",
        "--trace",
        trace.to_str().unwrap(),
        qp.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,phase,f,F_mu,v_norm_x,alpha,zeta,l_estimate,inner_trial,grad_residual,complementarity,wall_time_ns"
    );
    let f_mu: Vec<f64> = lines
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|r| r[1] == "outer")
        .map(|r| r[3].parse().unwrap())
        .collect();
    assert!(f_mu.len() > 2);
    assert!(f_mu.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn bench_table_over_eps_grid() {
    let dir = tempfile::tempdir().unwrap();
    let probs = dir.path().join("problems");
    std::fs::create_dir(&probs).unwrap();
    std::fs::copy(problem("convex_qp.json"), probs.join("convex_qp.json")).unwrap();
    let table = dir.path().join("table.csv");
    let out = run(&[
        "bench",
        "--eps-grid",
        "1e-1,1e-2,1e-3",
        "--algo",
        "ahba",
        probs.to_str().unwrap(),
        "--out",
        table.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&table).unwrap();
    let mut lines = text.lines();
    let header: Vec<_> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "iterations").unwrap();
    let iters: Vec<u64> = lines
        .map(|l| l.split(',').nth(col).unwrap().parse().unwrap())
        .collect();
    assert_eq!(iters.len(), 3);
    assert!(iters.windows(2).all(|w| w[0] <= w[1]), "{iters:?}");
}

#[test]
fn selftest_passes() {
    let out = run(&["selftest"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}
