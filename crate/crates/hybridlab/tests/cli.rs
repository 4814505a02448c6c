//! End-to-end checks of the compiled binary: exit codes, file outputs,
//! and that the bundled example configs stay loadable.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hybridlab"));
    c.env("HYBRIDLAB_THREADS", "2");
    c
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_cfg(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p
}

const SHORT_NDC: &str = r#"{
  "model": {"kind": "ndc"},
  "training": {"train": {"epochs": 30, "patience": 0, "seed": 3}},
  "experiment": {
    "dt_s": 1.0, "initial_soc": 0.95, "seed": 5,
    "profiles": [
      {"name": "c1", "role": "train", "constant_c_rate": {"c_rate": 1.0, "duration_s": 300}},
      {"name": "c2", "role": "test", "constant_c_rate": {"c_rate": 2.0, "duration_s": 150}}
    ]
  },
  "output": {"dir": "out", "plots": false}
}"#;

#[test]
fn bundled_example_configs_load() {
    for name in ["example_spmt.json", "example_ndc.json", "example_aging.json"] {
        let path = repo_root().join("configs").join(name);
        hybridlab::config::RunConfig::load(&path)
            .unwrap_or_else(|e| panic!("{name} failed to load: {e}"));
    }
}

#[test]
fn missing_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["generate", "--config"])
        .arg(dir.path().join("nope.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("error:"));
    // the failed run must not leave any files behind
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), r#"{"model": {"kind": "ndc"}, "experiment": {"dt_s": -1}}"#);
    let out = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}

#[test]
fn generate_with_no_profiles_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), r#"{"model": {"kind": "ndc"}}"#);
    let out = bin().args(["generate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("no profiles configured"));
}

#[test]
fn simulate_writes_trace_with_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), SHORT_NDC);
    let out = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let trace = std::fs::read_to_string(dir.path().join("out/c1_trace.csv")).unwrap();
    // header + one record per 1 s step over [0, 300]
    assert_eq!(trace.lines().count(), 1 + 301);
}

#[test]
fn simulate_cutoff_exits_3_but_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        r#"{"model": {"kind": "ndc"},
            "experiment": {"initial_soc": 0.05, "profiles": [
              {"name": "drain", "role": "train", "constant_c_rate": {"c_rate": 2.0, "duration_s": 3600}}
            ]}}"#,
    );
    let out = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("voltage limit"));
    assert!(dir.path().join("out/drain_trace.csv").exists());
}

#[test]
fn full_pipeline_runs_and_predict_matches_eval() {
    let dir = tempfile::tempdir().unwrap();
    // disable the thermal attachment so eval (dataset temperature) and
    // predict (--temperature flag) see the same ambient 25 C features
    let cfg_json = SHORT_NDC.replacen(
        r#""model": {"kind": "ndc"},"#,
        r#""model": {"kind": "ndc"},
            "truth": {"base": "ndc", "thermal": null, "noise_std_v": 0.0},"#,
        1,
    );
    let cfg = write_cfg(dir.path(), &cfg_json);
    let out_dir = dir.path().join("out");

    let out = bin().args(["generate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let manifest = out_dir.join("manifest.csv");
    assert!(manifest.exists());

    let out = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--manifest")
        .arg(&manifest)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let model = out_dir.join("model.json");
    assert!(model.exists());
    assert!(out_dir.join("loss_history.csv").exists());

    let out = bin()
        .args(["eval", "--config"])
        .arg(&cfg)
        .arg("--model")
        .arg(&model)
        .arg("--manifest")
        .arg(&manifest)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(out_dir.join("report.csv").exists());
    assert!(out_dir.join("report.txt").exists());
    let table = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(table.contains("RER [%]"));

    let out = bin()
        .args(["predict", "--config"])
        .arg(&cfg)
        .arg("--model")
        .arg(&model)
        .args(["--profile", "c1", "--temperature", "25"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));

    // with zero noise and no thermal drift, predict's hybrid series must
    // reproduce eval's hybrid column on the same profile
    let resid = std::fs::read_to_string(out_dir.join("residuals_c1.csv")).unwrap();
    let pred = std::fs::read_to_string(out_dir.join("predict_c1.csv")).unwrap();
    let eval_hyb: Vec<&str> =
        resid.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    let pred_hyb: Vec<&str> =
        pred.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(eval_hyb.len(), pred_hyb.len());
    assert_eq!(eval_hyb, pred_hyb);
}
