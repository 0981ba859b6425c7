mod common;

use std::path::Path;
use std::process::{Command, Output};

use dsnn_core::config::ExperimentConfig;
use dsnn_core::data::UNSW_FEATURES;

fn dsnn(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dsnn"));
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.args(args).output().unwrap()
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn preprocess_then_lifelong_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let csv = common::write_flows(dir.path());
    let cfg = common::flow_config(dir.path(), &csv);
    let config = write_config(dir.path(), &cfg);

    let first = dsnn(&["preprocess"], Some(&config));
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let cache = dir.path().join("cache");
    let hash = std::fs::read_to_string(cache.join("manifest.sha256")).unwrap();
    let again = dsnn(&["preprocess"], Some(&config));
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(cache.join("manifest.sha256")).unwrap(), hash);

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(cache.join("manifest.json")).unwrap()).unwrap();
    let features: Vec<&str> = manifest["features"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(features, UNSW_FEATURES);
    assert_eq!(manifest["feature_count"], 42);
    assert_eq!(manifest["excluded"], 12);
    assert_eq!(manifest["stats"]["min"].as_array().unwrap().len(), 42);

    let out = dir.path().join("out");
    let run = dsnn(&["lifelong"], Some(&config));
    assert_eq!(run.status.code(), Some(0), "{}", stderr(&run));
    for name in [
        "config.toml",
        "report.json",
        "accuracy_matrix.csv",
        "per_class.csv",
        "trajectory.csv",
        "events.csv",
        "comparison.csv",
        "checkpoint.json",
    ] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    // The persisted snapshot loads back to the config that ran.
    assert_eq!(ExperimentConfig::load(&out.join("config.toml")).unwrap(), cfg);

    let matrix = std::fs::read_to_string(out.join("accuracy_matrix.csv")).unwrap();
    for variant in ["dynamic", "static"] {
        for t in 0..3 {
            for k in t..3 {
                assert!(matrix.lines().any(|l| l.starts_with(&format!("{variant},{t},{k},"))));
            }
        }
    }
    let events = std::fs::read_to_string(out.join("events.csv")).unwrap();
    let prune_batches: Vec<u64> = events
        .lines()
        .skip(1)
        .filter(|l| l.contains(",prune,"))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    let mut last: std::collections::BTreeMap<String, (u64, usize)> = Default::default();
    for line in std::fs::read_to_string(out.join("trajectory.csv")).unwrap().lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (batch, n): (u64, usize) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        if let Some(&(b0, n0)) = last.get(f[0]) {
            if f[0] == "static" {
                assert_eq!(n, n0);
            } else if n < n0 {
                assert!(prune_batches.iter().any(|&p| p >= b0 && p <= batch), "shrank at batch {batch}");
            }
        }
        last.insert(f[0].to_string(), (batch, n));
    }

    let ck = out.join("checkpoint.json");
    let e1 = dir.path().join("e1");
    let e2 = dir.path().join("e2");
    for e in [&e1, &e2] {
        let o = dsnn(&["eval", "--checkpoint", ck.to_str().unwrap(), "--out", e.to_str().unwrap()], None);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let r1 = std::fs::read(e1.join("eval_report.json")).unwrap();
    assert_eq!(r1, std::fs::read(e2.join("eval_report.json")).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&r1).unwrap();
    for variant in ["dynamic", "static"] {
        assert!(report[variant]["phase1_sparsity"].as_f64().unwrap() > 0.0);
        assert!(report[variant]["phase2_sparsity"].is_f64());
    }
}

#[test]
fn missing_input_is_a_validation_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let absent = dir.path().join("nowhere.csv");
    let cfg = common::flow_config(dir.path(), &absent);
    let o = dsnn(&["preprocess"], Some(&write_config(dir.path(), &cfg)));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nowhere.csv"), "{}", stderr(&o));

    let o = dsnn(&["lifelong"], Some(&write_config(dir.path(), &cfg)));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("manifest.json"));
}

#[test]
fn bad_config_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[growth]\np_th = 0.2\nf_th = 0.3\n").unwrap();
    let out = dir.path().join("sv");
    let o = dsnn(&["synth-verify", "--out", out.to_str().unwrap()], Some(&path));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("p_th"));
    assert!(!out.exists());

    std::fs::write(&path, "seeed = 1\n").unwrap();
    assert_eq!(dsnn(&["synth-verify"], Some(&path)).status.code(), Some(1));
    assert_eq!(dsnn(&["no-such-command"], None).status.code(), Some(1));
}

#[test]
fn corrupt_checkpoint_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck.json");
    std::fs::write(&ck, "{\"version\": 1}").unwrap();
    let o = dsnn(&["eval", "--checkpoint", ck.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("corrupt checkpoint"));
}

#[test]
fn synthetic_lifelong_reports_both_variants() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = dsnn(&["lifelong", "--synthetic", "--seed", "3", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("dynamic: task-1 recall") && stdout.contains("static: task-1 recall"));
    let cmp = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert!(cmp.starts_with("metric,dynamic,static\ntask1_recall,"));
}
