use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const PENDULUM: &str = r#"{"environment": "pendulum", "experiment_id": "t",
 "data": {"n_train": 2, "n_test": 1, "steps": 50, "stride": 5},
 "pi": {"trajectories": 8, "iterations": 3},
 "warm_iterations": 2,
 "pretrain": {"settings": {"epochs": 5}},
 "train": {"epochs": 2},
 "eval": {"runs": 2, "duration": 5.0},
 "simulate": {"duration": 5.0},
 "gradcheck": {"instances": 2},
 "costmap": {"theta_points": 7, "theta_dot_points": 5}}"#;

const LINEAR: &str = r#"{"environment": "linear", "experiment_id": "t",
 "data": {"n_train": 6, "n_test": 2, "horizon": 8},
 "pi": {"trajectories": 8, "iterations": 3, "horizon": 8},
 "train": {"epochs": 2, "batch": 4},
 "simulate": {"duration": 0.2}}"#;

fn pinet(dir: &Path, threads: usize, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_pinet"))
        .current_dir(dir)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

fn ok(dir: &Path, threads: usize, args: &[&str]) -> String {
    let (code, text) = pinet(dir, threads, args);
    assert_eq!(code, 0, "{args:?}: {text}");
    text
}

fn setup(config: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, config).unwrap();
    (dir, cfg)
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut map = BTreeMap::new();
    for e in walk(dir) {
        map.insert(e.strip_prefix(dir).unwrap().display().to_string(), fs::read(&e).unwrap());
    }
    map
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Runs every verb into `run/` with the given thread count.
fn all_verbs(dir: &Path, threads: usize, pendulum: bool) -> BTreeMap<String, Vec<u8>> {
    let run = dir.join(format!("run{threads}"));
    let _ = fs::remove_dir_all(&run);
    let r = run.to_str().unwrap();
    let base = ["--config", "config.json", "--seed", "3"];
    let with = |extra: &[&str]| -> Vec<String> { base.iter().chain(extra).map(|s| s.to_string()).collect() };
    let call = |v: Vec<String>| ok(dir, threads, &v.iter().map(String::as_str).collect::<Vec<_>>());
    call(with(&["gen-data", "--out", r]));
    call(with(&["train", "--out", r]));
    let ck = format!("{r}/checkpoint.json");
    call(with(&["eval", "--out", &format!("{r}/eval"), "--data", r, "--checkpoint", &ck]));
    call(with(&["eval", "--out", &format!("{r}/expert"), "--data", r, "--expert"]));
    call(with(&["simulate", "--out", &format!("{r}/sim"), "--data", r, "--checkpoint", &ck]));
    call(with(&["gradcheck", "--out", &format!("{r}/grad")]));
    if pendulum {
        call(with(&["export-costmap", "--out", &format!("{r}/map"), "--checkpoint", &ck]));
    }
    files(&run)
}

#[test]
fn every_verb_is_byte_identical_across_reruns_and_thread_counts() {
    for (config, pendulum) in [(PENDULUM, true), (LINEAR, false)] {
        let (dir, _) = setup(config);
        let one = all_verbs(dir.path(), 1, pendulum);
        let again = all_verbs(dir.path(), 1, pendulum);
        let four = all_verbs(dir.path(), 4, pendulum);
        assert!(one.len() >= 12, "{:?}", one.keys());
        assert!(!one.keys().any(|k| k.ends_with(".lock")));
        for (name, bytes) in &one {
            assert!(again[name] == *bytes, "{name} differs on rerun");
            assert!(four[name] == *bytes, "{name} differs with 4 threads");
        }
    }
}

#[test]
fn exit_codes() {
    let (dir, _) = setup(PENDULUM);
    let d = dir.path();
    fs::write(d.join("bad.json"), r#"{"train": {"epochs": 1, "bogus": 2}}"#).unwrap();
    let (code, text) = pinet(d, 1, &["gradcheck", "--config", "bad.json", "--out", "x"]);
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("train.bogus"));
    assert_eq!(pinet(d, 1, &["frobnicate"]).0, 1);
    assert_eq!(pinet(d, 1, &["eval", "--config", "config.json", "--out", "x"]).0, 1);

    fs::write(d.join("strict.json"), r#"{"gradcheck": {"instances": 1, "rel_tol": 1e-300, "abs_floor": 0.0}}"#)
        .unwrap();
    let (code, text) = pinet(d, 1, &["gradcheck", "--config", "strict.json", "--out", "g"]);
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("instance 0"), "{text}");
    assert!(d.join("g/gradcheck.json").exists());

    ok(d, 1, &["gen-data", "--config", "config.json", "--out", "data"]);
    fs::write(d.join("mem.json"), PENDULUM.replacen("\"train\": {", "\"train\": {\"memory_budget_bytes\": 1000, ", 1))
        .unwrap();
    let (code, text) = pinet(d, 1, &["train", "--config", "mem.json", "--out", "m", "--data", "data"]);
    assert_eq!(code, 3, "{text}");
    assert!(text.contains("factor"), "{text}");
    assert!(!d.join("m/pretrain_history.csv").exists());
}

#[test]
fn refuses_to_overwrite_and_respects_the_lock() {
    let (dir, _) = setup(PENDULUM);
    let d = dir.path();
    let args = ["export-costmap", "--config", "config.json", "--out", "map", "--expert"];
    ok(d, 1, &args);
    let (code, text) = pinet(d, 1, &args);
    assert_eq!(code, 1);
    assert!(text.contains("--force"), "{text}");
    let mut forced = args.to_vec();
    forced.push("--force");
    ok(d, 1, &forced);
    fs::write(d.join("map/.pinet.lock"), "").unwrap();
    let (code, text) = pinet(d, 1, &forced);
    assert_eq!(code, 1);
    assert!(text.contains("locked"), "{text}");
}

#[test]
fn resume_continues_with_the_saved_optimizer() {
    let (dir, _) = setup(LINEAR);
    let d = dir.path();
    ok(d, 1, &["gen-data", "--config", "config.json", "--out", "data"]);
    fs::write(d.join("three.json"), LINEAR.replace("\"epochs\": 2", "\"epochs\": 3")).unwrap();
    fs::write(d.join("one.json"), LINEAR.replace("\"epochs\": 2", "\"epochs\": 1")).unwrap();
    ok(d, 1, &["train", "--config", "three.json", "--out", "full", "--data", "data"]);
    ok(d, 1, &["train", "--config", "config.json", "--out", "part", "--data", "data"]);
    ok(d, 1, &["train", "--config", "one.json", "--out", "rest", "--data", "data", "--resume", "part/last.json"]);
    assert_eq!(fs::read(d.join("full/last.json")).unwrap(), fs::read(d.join("rest/last.json")).unwrap());
    assert_eq!(fs::read(d.join("full/history.csv")).unwrap(), fs::read(d.join("rest/history.csv")).unwrap());
    let (code, text) = pinet(
        d,
        1,
        &["train", "--config", "one.json", "--out", "bad", "--data", "data", "--resume", "part/checkpoint.json"],
    );
    assert_eq!(code, 1);
    assert!(text.contains("optimizer"), "{text}");
}

#[test]
fn expert_eval_reproduces_the_manifest() {
    for config in [PENDULUM, LINEAR] {
        let (dir, _) = setup(config);
        let d = dir.path();
        ok(d, 1, &["gen-data", "--config", "config.json", "--out", "data"]);
        ok(d, 1, &["eval", "--config", "config.json", "--out", "ev", "--data", "data", "--expert"]);
        let m = json(&d.join("ev/metrics.json"));
        assert_eq!(m["matches_manifest"], Value::Bool(true));
        assert_eq!(m["dataset_expert"], json(&d.join("data/manifest.json"))["expert"]);
        assert!(m["mse_train"].is_null());
    }
}

#[test]
fn manifest_and_resolved_config() {
    let (dir, _) = setup(LINEAR);
    let d = dir.path();
    ok(d, 1, &["gen-data", "--config", "config.json", "--out", "data", "--seed", "9"]);
    let m = json(&d.join("data/manifest.json"));
    assert_eq!(m["version"], 1);
    assert_eq!(m["seed"], 9);
    assert_eq!(m["teacher"]["kind"], "linear");
    let cfg = json(&d.join("data/config.gen-data.json"));
    // defaults are echoed even where the file said nothing
    assert_eq!(cfg["pi"]["nu"], 1500.0);
    assert_eq!(cfg["train"]["optimizer"]["decay"], 0.9);
    assert_eq!(cfg["seed"], 9);
    let rows = fs::read_to_string(d.join("data/train.csv")).unwrap().lines().count();
    assert_eq!(rows, 1 + 6 * 9);
}

#[test]
fn empty_test_split_reports_absent_mse() {
    let (dir, _) = setup(&LINEAR.replace("\"n_test\": 2", "\"n_test\": 0"));
    let d = dir.path();
    ok(d, 1, &["gen-data", "--config", "config.json", "--out", "r"]);
    ok(d, 1, &["train", "--config", "config.json", "--out", "r"]);
    ok(d, 1, &["eval", "--config", "config.json", "--out", "r", "--checkpoint", "r/checkpoint.json"]);
    let m = json(&d.join("r/metrics.json"));
    assert!(m["mse_test"].is_null());
    assert!(m["mse_train"].as_f64().unwrap() > 0.0);
}

#[test]
fn teacher_cost_map_shape_and_minima() {
    let (dir, _) = setup(r#"{"environment": "pendulum"}"#);
    let d = dir.path();
    ok(d, 1, &["export-costmap", "--config", "config.json", "--out", "map", "--expert"]);
    let text = fs::read_to_string(d.join("map/costmap.csv")).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 101 * 101);
    let pi = std::f64::consts::PI;
    let zeros: Vec<&Vec<f64>> = rows.iter().filter(|r| r[2] == 0.0).collect();
    assert_eq!(zeros.len(), 2);
    assert!(zeros.iter().all(|r| r[0].abs() == pi && r[1] == 0.0));
    assert!(rows.iter().all(|r| r[2] >= 0.0));
}
