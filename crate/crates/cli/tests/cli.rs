use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_betajacobi"));
    c.env_remove("BETAJACOBI_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("JSON error record");
    serde_json::from_str(line).unwrap()
}

fn temp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("betajacobi-cli-{}-{name}", std::process::id()))
}

#[test]
fn sample_of_size_one() {
    let o = run(&["sample", "--n", "1", "--beta", "2", "--p", "2", "--q", "2", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["command"], "sample");
    assert_eq!(v["seed"], 1);
    assert!(v["version"].is_string() && v["wall_clock_seconds"].is_number());
    let ev = v["result"]["eigenvalues"].as_array().unwrap();
    assert_eq!(ev.len(), 1);
    let l = ev[0].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&l));
}

#[test]
fn cov_verify_passes() {
    let o = run(&["cov", "--a", "0.25", "--b", "0.5", "--beta", "2", "--K", "8", "--verify"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert!(v["result"]["verify"]["max_abs_diff"].as_f64().unwrap() <= 1e-8);
    assert_eq!(v["config"]["K"], 8);
}

#[test]
fn unknown_flag_is_validation_error() {
    let o = run(&["fluct", "--bogus", "3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_size_is_validation_error() {
    let o = run(&["sample", "--p", "2", "--q", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["kind"], "validation");
}

#[test]
fn quadrature_failure_exits_two() {
    let o = run(&["cov", "--a", "1/4", "--b", "1/2", "--K", "12", "--nodes", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "quadrature");
    assert_eq!(e["exit_code"], 2);
}

#[test]
fn extremal_spectrum_is_rejected() {
    let o = run(&["spectrum", "--p", "1", "--q", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["kind"], "extremal_regime");
}

#[test]
fn config_file_and_flag_override() {
    let cfg = temp("cfg.json");
    std::fs::write(&cfg, r#"{"n": 20, "beta": 1.0, "p": 3.0, "q": 2.0, "funcs": "x,gamma2", "reps": 40, "seed": 11}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let a = stdout_json(&run(&["fluct", "--config", c]));
    assert_eq!(a["config"]["n"], 20);
    assert_eq!(a["config"]["reps"], 40);
    let b = stdout_json(&run(&["fluct", "--config", c, "--seed", "12"]));
    assert_eq!(b["seed"], 12);
    assert_ne!(a["result"]["summaries"], b["result"]["summaries"]);
    let bad = temp("bad.json");
    std::fs::write(&bad, r#"{"nn": 3}"#).unwrap();
    assert_eq!(run(&["fluct", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
    let _ = std::fs::remove_file(cfg);
    let _ = std::fs::remove_file(bad);
}

#[test]
fn embedded_config_reproduces_run() {
    let out = temp("run.json");
    let args = ["fluct", "--n", "30", "--p", "2", "--q", "2", "--funcs", "gamma1..gamma3", "--reps", "64", "--seed", "7"];
    let mut full: Vec<&str> = args.to_vec();
    full.extend(["--out", out.to_str().unwrap()]);
    assert_eq!(run(&full).status.code(), Some(0));
    let first: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let cfg = temp("embedded.json");
    let mut embedded = first["config"].clone();
    embedded.as_object_mut().unwrap().remove("out");
    std::fs::write(&cfg, embedded.to_string()).unwrap();
    let again = bin()
        .args(["fluct", "--config", cfg.to_str().unwrap()])
        .env("BETAJACOBI_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(again.status.code(), Some(0));
    let mut second = stdout_json(&again);
    let mut first = first;
    assert_eq!(second["result"]["threads"], 3);
    first["result"].as_object_mut().unwrap().remove("threads");
    second["result"].as_object_mut().unwrap().remove("threads");
    assert_eq!(first["result"], second["result"]);
    assert_eq!(second["config"]["threads"], 3);
    let _ = std::fs::remove_file(out);
    let _ = std::fs::remove_file(cfg);
}

#[test]
fn fluct_writes_sample_csv() {
    let csv = temp("samples.csv");
    let o = run(&["fluct", "--n", "16", "--p", "2", "--q", "3", "--funcs", "x,exp", "--reps", "5", "--csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "replicate,x,exp");
    assert_eq!(lines.len(), 6);
    let _ = std::fs::remove_file(csv);
}

#[test]
fn expect_reports_deviation() {
    let o = run(&["expect", "--a", "1/4", "--b", "1/2", "--alpha", "1/2", "--k", "2", "--sizes", "32,64,128"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    let d = v["result"]["deviation"].as_f64().unwrap();
    assert!((d / (-3.0 / 128.0) - 1.0).abs() < 0.05, "{d}");
}

#[test]
fn eig_methods_agree() {
    let o = run(&["eig", "--n", "40", "--beta", "4", "--a", "1/5", "--b", "2/5", "--method", "both", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert!(v["result"]["max_method_difference"].as_f64().unwrap() < 1e-10);
}

#[test]
fn lln_and_extremal_and_concentration_run() {
    let o = run(&["lln", "--regime", "superlinear", "--sizes", "8,16", "--reps", "10"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["result"]["tables"][0]["rows"].as_array().unwrap().len(), 2);
    let o = run(&["extremal", "--n", "50", "--reps", "50"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["result"]["expected_second"], 1.0 / 16.0);
    let o = run(&["concentration", "--p", "3", "--q", "5", "--funcs", "x", "--n", "32", "--reps", "50"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert!((v["result"]["beta_poincare"][0]["unweighted"]["variance"].as_f64().unwrap() - 15.0 / 576.0).abs() < 1e-14);
    assert!(v["result"]["coupling"]["gap"].as_f64().unwrap() >= 0.0);
}

#[test]
fn spectrum_reports_masses() {
    let o = run(&["spectrum", "--a", "1/4", "--b", "1/2", "--funcs", "gamma1,x", "--x", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert!((v["result"]["mu_mass"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!((v["result"]["functions"][0]["sigma_sq"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert!(v["result"]["stieltjes"]["m0"].is_number());
}

#[test]
fn verify_all_passes() {
    let o = run(&["verify-all"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(v["result"]["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}
