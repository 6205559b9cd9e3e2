use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn specs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/specs")
}

fn spec(name: &str) -> String {
    specs().join(name).display().to_string()
}

fn frontlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frontlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn classify_delta_minus_one_is_critical() {
    let out = frontlab(&[
        "classify",
        "--kernel",
        &spec("delta_minus1.json"),
        "--reaction",
        &spec("u_minus_u2.json"),
        "--mu",
        "1",
    ]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "Critical");
}

#[test]
fn dispersion_on_bernoulli_kernel() {
    let out = frontlab(&[
        "dispersion",
        "--kernel",
        &spec("bernoulli.json"),
        "--reaction",
        &spec("u_minus_u2.json"),
        "--mu",
        "1",
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["classification"], "Regular");
    assert!((v["lambda_star"].as_f64().unwrap() - 1.19968).abs() < 1e-5);
    assert!((v["c_star"].as_f64().unwrap() - 1.50888).abs() < 1e-5);
    for key in ["nu", "m", "varK", "Xi"] {
        assert!(v[key].is_number(), "{key} missing");
    }
}

#[test]
fn validate_cubic_is_not_probabilistic() {
    let out = frontlab(&["validate", "--reaction", &spec("u_minus_u3.json")]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("not probabilistic"), "{text}");
    assert!(text.contains("F1: pass"));
}

#[test]
fn validate_reports_bad_kernel_mass_with_pointer() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"atoms": [{"pos": -1.0, "mass": 0.7}]}"#).unwrap();
    let out = frontlab(&["validate", "--kernel", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["status"], "failed");
    assert!(v.to_string().contains("/kernel/mass"), "{v}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = frontlab(&["classify", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_check_exits_one_with_failure_json() {
    let out = frontlab(&[
        "ballot",
        "--kernel",
        &spec("uniform.json"),
        "--t",
        "16,64",
        "--x",
        "2,4",
        "--trials",
        "1e4",
        "--seed",
        "1",
        "--max-band",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["status"], "failed");
    assert_eq!(v["command"], "ballot");
    assert_eq!(v["failures"][0]["check"], "band ratio");
}

#[test]
fn simulate_then_fit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = frontlab(&[
        "simulate",
        "--kernel",
        &spec("uniform.json"),
        "--reaction",
        &spec("u_minus_u2.json"),
        "--mu",
        "1",
        "--dx",
        "0.02",
        "--dt",
        "auto",
        "--horizon",
        "100",
        "--window-width",
        "200",
        "--anchor",
        "0.25",
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.contains("# c_star="));
    assert!(text.contains("t,theta,sigma,flagged"));

    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("trace.csv.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["spec_sha256"].as_str().unwrap().len(), 64);

    let out = frontlab(&["fit", "--trace", trace.to_str().unwrap(), "--window", "10,100"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let c_hat = fit["c_hat"].as_f64().unwrap();
    assert!((c_hat - 0.9054).abs() < 0.01, "{fit}");
}

#[test]
fn brw_runs_are_reproducible_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let path = dir.path().join(name);
        let out = frontlab(&[
            "brw",
            "--kernel",
            &spec("uniform.json"),
            "--kappa",
            "2:0.5,3:0.5",
            "--t",
            "2",
            "--trials",
            "2000",
            "--seed",
            "7",
            "--threads",
            threads,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stdout(&out));
        std::fs::read_to_string(path).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "3");
    assert_eq!(a, b);
    assert!(a.contains("x,p_max_gt_x,stderr"));
}

#[test]
fn example_specs_validate_and_simulate() {
    let out = frontlab(&["validate", "--spec", &spec("uniform_front.json")]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("Regular"));

    let out = frontlab(&["--json", "classify", "--spec", &spec("critical.json")]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["classification"], "Critical");

    let out = frontlab(&["simulate", "--spec", &spec("uniform_front.json"), "--horizon", "20"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("# classification=Regular"));
}

#[test]
fn critical_and_trapping_commands_pass_short_runs() {
    let out = frontlab(&["critical", "--check", "all", "--horizon", "100"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let out = frontlab(&["trapping-front", "--depth", "5", "--dx", "0.01", "--horizon", "30"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("stationary residual"));
}
