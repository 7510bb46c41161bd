use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use skewdiff::densities::q_theorem2;
use skewdiff::sde_engine::PathEnsemble;
use skewdiff::Chirality;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skewdiff")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    all.extend(["--output-dir", dir.to_str().unwrap()]);
    run(&all)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for c in ["family", "simulate", "density", "fokker-planck", "censor", "mixture", "ou", "validate"] {
        assert!(text.contains(c), "missing {c}");
    }
}

#[test]
fn density_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["density", "--kind", "theorem2", "--alpha", "1.5", "--t", "0.5,2", "--x", "-2:2:0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("density.csv")).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let q = q_theorem2(v[0], v[1], 1.5, Chirality::Right).unwrap();
        assert!((v[2] - q).abs() <= 1e-15 * q.max(1.0));
        rows += 1;
    }
    assert_eq!(rows, 18);
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["command"], "density");
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["parameters"]["alpha"], 1.5);
}

#[test]
fn simulate_reruns_are_byte_identical() {
    for (format, file) in [("csv", "ensemble.csv"), ("binary", "ensemble.skdf")] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let args = ["simulate", "--alpha", "1", "--paths", "200", "--steps", "100", "--seed", "7", "--format", format];
        assert!(run_in(a.path(), &args).status.success());
        assert!(run_in(b.path(), &args).status.success());
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{format} output differs between runs");
        let ens = PathEnsemble::load(&a.path().join(file)).unwrap();
        assert_eq!(ens.n_paths, 200);
        assert_eq!(ens.seed, 7);
    }
}

#[test]
fn different_seeds_differ() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--alpha", "1", "--paths", "50", "--steps", "20"];
    assert!(run_in(a.path(), &[&args[..], &["--seed", "1"]].concat()).status.success());
    assert!(run_in(b.path(), &[&args[..], &["--seed", "2"]].concat()).status.success());
    let x = PathEnsemble::load(&a.path().join("ensemble.csv")).unwrap();
    let y = PathEnsemble::load(&b.path().join("ensemble.csv")).unwrap();
    assert_ne!(x.terminal(), y.terminal());
}

#[test]
fn bad_parameters_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["density", "--kind", "theorem2"]).status.code(), Some(2));
    assert_eq!(run_in(dir.path(), &["density", "--kind", "nope", "--alpha", "1"]).status.code(), Some(2));
    assert_eq!(run_in(dir.path(), &["simulate", "--bogus"]).status.code(), Some(2));
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"parameters": {"alpah": 1}}"#).unwrap();
    let out = run_in(dir.path(), &["density", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpah"));
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"command": "family", "seed": 5, "parameters": {"kind": "theorem1", "T": 2.0, "t": "0.5,1"}}"#)
        .unwrap();
    let out = run_in(dir.path(), &["family", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["seed"], 5);
    assert_eq!(m["parameters"]["T"], 2.0);
    let text = fs::read_to_string(dir.path().join("family.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn runtime_failure_exits_3_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["censor", "--paths", "500", "--steps", "50"]);
    assert_eq!(out.status.code(), Some(3));
    let d = read_json(&dir.path().join("diagnostics.json"));
    assert_eq!(d["command"], "censor");
    assert!(d["error"].as_str().unwrap().contains("too few samples"));
    assert_eq!(read_json(&dir.path().join("manifest.json"))["exit_code"], 3);
}

#[test]
fn every_command_writes_its_artifacts() {
    let cases: [(&[&str], &[&str]); 6] = [
        (&["family", "--kind", "constant_correlation", "--correlation", "0.5"], &["family.csv"]),
        (&["fokker-planck", "--alpha", "1", "--nx", "201", "--nt", "200"], &["fokker_planck.csv", "fokker_planck.json"]),
        (&["censor", "--paths", "6000", "--steps", "100", "--t", "0.5"], &["censor.csv", "censor.json"]),
        (&["mixture", "--paths", "2000", "--steps", "100"], &["mixture.csv", "mixture.json"]),
        (&["mixture", "--kind", "ou", "--paths", "2000", "--steps", "100", "--x0", "0.5"], &["mixture.csv", "mixture.json"]),
        (&["ou", "--lambda", "0.5", "--t", "1"], &["ou.csv", "ou.json"]),
    ];
    for (args, files) in cases {
        let dir = tempfile::tempdir().unwrap();
        let out = run_in(dir.path(), args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let m = read_json(&dir.path().join("manifest.json"));
        for f in files {
            assert!(dir.path().join(f).exists(), "{args:?} missing {f}");
            assert!(m["artifacts"].as_array().unwrap().iter().any(|a| a == f));
        }
    }
}

#[test]
fn validate_subset_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["validate", "--suite", "quick", "--only", "family_consistency,selection_identity"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&dir.path().join("report.json"));
    assert_eq!(r["all_pass"], true);
    assert_eq!(r["checks"].as_array().unwrap().len(), 2);
    assert_eq!(run_in(dir.path(), &["validate", "--only", "no_such_check"]).status.code(), Some(2));
}
