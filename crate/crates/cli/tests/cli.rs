use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use hcut_cli::config::sha256_hex;
use hcut_cli::{run, ExperimentConfig};

fn hcut(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcut")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn moving_char_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = hcut(&["moving-char", "--n", "100"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("moving-char.json"));
    assert!(v["result"]["max_error"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["provenance"]["library_version"], hcut::VERSION);
    assert_eq!(v["provenance"]["config_hash"].as_str().unwrap().len(), 64);
    assert!(dir.path().join("moving-char.csv").exists());
}

#[test]
fn path_distortion_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = hcut(&["distortion", "--graph", "path4", "--exact"], dir.path());
    assert!(out.status.success());
    let v = read_json(&dir.path().join("distortion.json"));
    assert!((v["result"]["distortion"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v["result"]["status"], "ExactCertified");
    let witness = read_json(&dir.path().join("witness.json"));
    assert_eq!(witness["n"], 4);
}

#[test]
fn cayley_ball_feeds_distortion() {
    let dir = tempfile::tempdir().unwrap();
    assert!(hcut(&["cayley-ball", "--k", "2"], dir.path()).status.success());
    let ball = dir.path().join("ball.json");
    assert_eq!(read_json(&ball)["n"], 17);
    let out = hcut(&["distortion", "--colgen", "--budget", "50", "--space", ball.to_str().unwrap()], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("distortion.json"));
    let expected = sha256_hex(&std::fs::read(&ball).unwrap());
    assert_eq!(v["provenance"]["input_hashes"]["space"], expected.as_str());
    assert!((v["result"]["distortion"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| hcut(args, dir.path()).status.code();
    assert_eq!(code(&["moving-char", "-p", "bogus=1"]), Some(2));
    assert_eq!(code(&["distortion"]), Some(3));
    assert_eq!(code(&["distortion", "--space", "/nonexistent/ball.json"]), Some(3));
    assert_eq!(code(&["cayley-ball", "--k", "9"]), Some(4));
    let out = hcut(&["moving-char", "--n", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "schema");
}

#[test]
fn bad_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"format_version": 1, "command": "moving-char", "output_dir": "x", "colour": 1}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hcut")).args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_hcut")).args(["run", "--config", "/nonexistent.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn emitted_config_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let out = Command::new(env!("CARGO_BIN_EXE_hcut"))
        .args(["slice", "--seed", "5", "-p", "n=6", "--emit-config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let mut cfg = ExperimentConfig::load(&cfg_path).unwrap();
    assert_eq!(cfg.seed, 5);
    cfg.output_dir = dir.path().join("a");
    let a = run(&cfg).unwrap();
    cfg.output_dir = dir.path().join("b");
    let b = run(&cfg).unwrap();
    assert_eq!(std::fs::read(&a.csv).unwrap(), std::fs::read(&b.csv).unwrap());
    assert_eq!(std::fs::read(&a.artifacts[0]).unwrap(), std::fs::read(&b.artifacts[0]).unwrap());
    let strip = |p: &Path| {
        let mut v = read_json(p);
        v.as_object_mut().unwrap().remove("timestamp");
        v
    };
    assert_eq!(strip(&a.result_json), strip(&b.result_json));
    assert_eq!(strip(&a.result_json)["result"]["n"], 6);
}

#[test]
fn schema_subcommand_prints_schema() {
    let out = Command::new(env!("CARGO_BIN_EXE_hcut")).arg("schema").output().unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["additionalProperties"], false);
}
