use std::fs;
use std::process::{Command, Output};

use tempfile::TempDir;

fn ergo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ergo")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn derive_dynamic_prints_closed_forms() {
    let log = ergo(&["derive-dynamic", "--utility", "log", "--a_u", "0.05", "--b_u", "0.2"]);
    assert_eq!(log.status.code(), Some(0));
    assert_eq!(stdout(&log), "a_x = 0.07*x\nb_x = 0.2*x\n");
    let linear = ergo(&["derive-dynamic", "--utility", "linear", "--a_u", "0.05", "--b_u", "0.2"]);
    assert_eq!(stdout(&linear), "a_x = 0.05\nb_x = 0.2\n");
    let sqrt = ergo(&["derive-dynamic", "--utility", "sqrt", "--a_u", "1", "--b_u", "1"]);
    assert_eq!(stdout(&sqrt), "a_x = 2*sqrt(x) + 1\nb_x = 2*sqrt(x)\n");
}

#[test]
fn derive_dynamic_tabulates_expression_utilities() {
    let out = ergo(&[
        "derive-dynamic",
        "--utility",
        "expr:x + ln(x)",
        "--domain",
        "0,inf",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["table"].as_array().unwrap().len(), 33);
}

#[test]
fn check_reports_exp_test_ratio() {
    let out = ergo(&["check", "--dynamic", "exp_test"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["consistent"], true);
    assert!((v["ratio"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    let bad = json(&ergo(&["check", "--dynamic", "expr:x;1"]));
    assert_eq!(bad["consistent"], false);
    assert!(bad["ratio"].is_null());
}

#[test]
fn derive_utility_of_gbm_is_scaled_log() {
    let out = ergo(&[
        "derive-utility",
        "--dynamic",
        "gbm:mu=0.05,sigma=0.2",
        "--b_u",
        "0.2",
        "--grid",
        "5",
    ]);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,u"));
    for line in lines {
        let (x, u) = line.split_once(',').unwrap();
        let (x, u): (f64, f64) = (x.parse().unwrap(), u.parse().unwrap());
        assert!((u - x.ln()).abs() < 1e-9 * (1.0 + u.abs()), "{line}");
    }
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| ergo(args).status.code();
    assert_eq!(code(&["check", "--dynamic", "nope"]), Some(2));
    assert_eq!(code(&["check", "--dynamic", "gbm:mu=0.05"]), Some(2));
    assert_eq!(code(&["simulate", "--dynamic", "exp_test", "--dt", "0.3"]), Some(2));
    assert_eq!(code(&["check"]), Some(2));
    assert_eq!(code(&["derive-utility", "--dynamic", "expr:x;1"]), Some(3));
    assert_eq!(code(&["density", "--utility", "exp_test_u", "--x0", "1"]), Some(3));
    let same = [
        "decide",
        "--dynamic",
        "gbm:mu=0.05,sigma=0.2",
        "--dynamic",
        "gbm:mu=0.05,sigma=0.2",
        "--dt",
        "0.05",
        "--horizon",
        "8",
        "--paths",
        "500",
    ];
    let out = ergo(&same);
    assert_eq!(out.status.code(), Some(4));
    let v = json(&out);
    assert!(v["chosen"].is_null());
    assert_eq!(v["seed"], 0);
}

#[test]
fn decide_picks_the_faster_grower() {
    let out = ergo(&[
        "decide",
        "--dynamic",
        "gbm:mu=0.07,sigma=0.2",
        "--dynamic",
        "gbm:mu=0.03,sigma=0.2",
        "--dt",
        "0.05",
        "--horizon",
        "16",
        "--paths",
        "1000",
        "--seed",
        "9",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["chosen"], "first");
    assert_eq!(v["seed"], 9);
    assert_eq!(v["ladder"].as_array().unwrap().len(), 5);
}

#[test]
fn fixed_seed_outputs_are_byte_identical() {
    let runs: [&[&str]; 4] = [
        &[
            "simulate",
            "--dynamic",
            "exp_test",
            "--horizon",
            "1",
            "--paths",
            "4",
            "--seed",
            "5",
        ],
        &[
            "growth",
            "--dynamic",
            "exp_test",
            "--utility",
            "exp",
            "--x0",
            "2",
            "--horizon",
            "100",
            "--paths",
            "1000",
        ],
        &["density", "--utility", "exp_test_u", "--t", "5", "--grid", "50"],
        &[
            "decide",
            "--dynamic",
            "gbm:mu=0.07,sigma=0.2",
            "--dynamic",
            "gbm:mu=0.03,sigma=0.2",
            "--horizon",
            "4",
            "--paths",
            "200",
            "--rate_horizon",
            "100",
        ],
    ];
    for args in runs {
        let (a, b) = (ergo(args), ergo(args));
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
    let base = ergo(runs[0]);
    let mut other: Vec<&str> = runs[0].to_vec();
    *other.last_mut().unwrap() = "6";
    assert_ne!(ergo(&other).stdout, base.stdout);
}

#[test]
fn density_reproduces_the_simulated_law() {
    let out = ergo(&[
        "density",
        "--utility",
        "exp_test_u",
        "--t",
        "5",
        "--a_u",
        "0.5",
        "--b_u",
        "1",
        "--ks_paths",
        "2000",
        "--dt",
        "0.01",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["validation"]["ks"]["pass"], true);
    assert!((v["mass"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 201);
    // heavy tail toward low wealth: the mode sits right of the window centre
    let mode = points
        .iter()
        .max_by(|a, b| a[1].as_f64().unwrap().total_cmp(&b[1].as_f64().unwrap()))
        .unwrap()[0]
        .as_f64()
        .unwrap();
    let (lo, hi) = (points[0][0].as_f64().unwrap(), points[200][0].as_f64().unwrap());
    assert!(mode > 0.5 * (lo + hi));
}

#[test]
fn outputs_are_written_atomically() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("density.csv");
    let target = path.to_str().unwrap();
    let ok = ergo(&["density", "--utility", "log", "--grid", "3", "--out", target]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(ok.stdout.is_empty());
    assert!(fs::read_to_string(&path).unwrap().starts_with("x,pdf\n"));
    fs::write(&path, "sentinel").unwrap();
    let failed = ergo(&["density", "--utility", "exp_test_u", "--x0", "1", "--out", target]);
    assert_eq!(failed.status.code(), Some(3));
    assert_eq!(fs::read_to_string(&path).unwrap(), "sentinel");
    let fresh = dir.path().join("never.csv");
    ergo(&["simulate", "--dynamic", "nope", "--out", fresh.to_str().unwrap()]);
    assert!(!fresh.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn spec_files_are_accepted() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("gbm.json");
    fs::write(
        &path,
        r#"{"kind": "catalog", "name": "gbm_dynamic", "params": {"mu": 0.05, "sigma": 0.2}}"#,
    )
    .unwrap();
    let spec = format!("@{}", path.display());
    let v = json(&ergo(&["check", "--dynamic", &spec]));
    assert!((v["ratio"].as_f64().unwrap() - 0.15).abs() < 1e-12);
    fs::write(&path, r#"{"kind": "catalog", "name": "gbm_dynamic", "colour": 1}"#).unwrap();
    assert_eq!(ergo(&["check", "--dynamic", &spec]).status.code(), Some(2));
}
