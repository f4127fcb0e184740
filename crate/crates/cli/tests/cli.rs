use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_presym-oc"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/examples")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const MIXED: &str = "\
states: q1, q2
controls: u1
dynamics:
  q1' = q2*u1
  q2' = 0
lagrangian: 0.5*q2*u1^2
holonomic:
  q2*(q2 - 1)
";

#[test]
fn analyze_lq_is_regular_with_one_level() {
    let p = fixture("lq_single_integrator.ocp");
    let out = run(&["analyze", "--problem", p.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["regularity"]["classification"], "REGULAR");
    assert_eq!(v["system"]["hamiltonian"], "p1*u1 - 0.5*u1^2");
    assert_eq!(v["ladder"]["final_level_index"], 1);
    assert_eq!(v["ladder"]["stabilized"], true);
    assert_eq!(v["ladder"]["multipliers"]["status"], "determined");
}

#[test]
fn analyze_is_byte_identical_across_runs() {
    let p = fixture("quartic_oscillator.ocp");
    let a = run(&["analyze", "--problem", p.to_str().unwrap(), "--seed", "7"]);
    let b = run(&["analyze", "--problem", p.to_str().unwrap(), "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn rank_violation_exits_two_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("mixed.ocp");
    std::fs::write(&p, MIXED).unwrap();
    let out = run(&["analyze", "--problem", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["error"]["kind"], "rank_violation");
    assert_eq!(v["regularity"]["classification"], "MIXED");
}

#[test]
fn parse_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.ocp");
    std::fs::write(&p, "states: q1\ncontrols: u1\ndynamics:\n  q1' = u1 +\nlagrangian: u1\n").unwrap();
    let out = run(&["analyze", "--problem", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn missing_file_exits_one() {
    let out = run(&["symmetries", "--problem", "/nonexistent/problem.ocp"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn symmetries_report_both_criteria() {
    let p = fixture("bounded_curvature.ocp");
    let out = run(&["symmetries", "--problem", p.to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&out);
    let syms = v["symmetries"].as_array().unwrap();
    assert_eq!(syms.len(), 6);
    for s in syms {
        assert_eq!(s["is_symmetry"], true, "{}", s["name"]);
        assert_eq!(s["lifted_is_symmetry"], true, "{}", s["name"]);
    }
    assert_eq!(syms[3]["momentum"]["expr"], "-(p1*x2) + p2*x1 - p4*y2 + p5*y1");
}

#[test]
fn reduce_at_zero_momentum() {
    let p = fixture("bounded_curvature.ocp");
    let out = run(&[
        "reduce",
        "--problem",
        p.to_str().unwrap(),
        "--mu",
        "0,0,0,0,0,0",
        "--count",
        "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &json(&out)["report"];
    assert_eq!(r["jacobian_rank"], 5);
    assert_eq!(r["levelset_dim"], 8);
    assert_eq!(r["omega_pullback_kernel_dim"], 8);
}

#[test]
fn infeasible_mu_exits_three_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("r.json");
    let p = fixture("bounded_curvature.ocp");
    let out = run(&[
        "reduce",
        "--problem",
        p.to_str().unwrap(),
        "--mu",
        "5,0,0,0,0,0",
        "--count",
        "2",
        "--attempts",
        "20",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["infeasible"], true);
    assert_eq!(v["mu"][0], 5.0);
}

#[test]
fn wrong_mu_length_exits_one() {
    let p = fixture("lq_single_integrator.ocp");
    let out = run(&["reduce", "--problem", p.to_str().unwrap(), "--mu", "1,2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn integrate_writes_csv_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let report = dir.path().join("report.json");
    let p = fixture("lq_single_integrator.ocp");
    let out = run(&[
        "integrate",
        "--problem",
        p.to_str().unwrap(),
        "--from",
        "0,1,1",
        "--t1",
        "1",
        "--step",
        "0.1",
        "--out",
        csv.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,q1,p1,u1,H,f_shift,chi_1"));
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
    assert!((last[1] - 1.0).abs() < 1e-12);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["mode"], "feedback");
    assert_eq!(v["termination"]["reason"], "completed");
}

#[test]
fn integrate_strict_gauge_rejects_undetermined_multipliers() {
    let p = fixture("bounded_curvature.ocp");
    let out = run(&["integrate", "--problem", p.to_str().unwrap(), "--t1", "0.1", "--step", "0.01"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero gauge"));
}

#[test]
fn integrate_rejects_infeasible_start() {
    let p = fixture("lq_single_integrator.ocp");
    let out = run(&["integrate", "--problem", p.to_str().unwrap(), "--from", "0,1,0", "--t1", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn integrate_output_is_byte_identical() {
    let p = fixture("bounded_curvature.ocp");
    let args = [
        "integrate",
        "--problem",
        p.to_str().unwrap(),
        "--t1",
        "0.2",
        "--step",
        "0.01",
        "--gauge",
        "zero",
        "--seed",
        "3",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn domain_override_is_parsed() {
    let p = fixture("lq_single_integrator.ocp");
    let ok = run(&["analyze", "--problem", p.to_str().unwrap(), "--domain", "q1=-2,2"]);
    assert!(ok.status.success());
    let bad = run(&["analyze", "--problem", p.to_str().unwrap(), "--domain", "q1=2"]);
    assert_eq!(bad.status.code(), Some(1));
}
