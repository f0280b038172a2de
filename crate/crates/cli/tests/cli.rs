use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mcframe"))
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn check_frame_on_graph_with_large_tau() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("frame-graph.toml");
    let o = run(&["check-frame", "--config", cfg.to_str().unwrap(), "--assert"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("check-frame.json"));
    assert!(v["relative_gap"].as_f64().unwrap() <= 1e-6);
    assert_eq!(v["config"]["seed"], 7);
    assert!(dir.path().join("check-frame.timing.json").exists());
}

#[test]
fn check_frame_contract_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("frame-graph.toml");
    let args = ["check-frame", "--config", cfg.to_str().unwrap(), "--tau", "2"];
    let o = run(&[&args[..], &["--assert"]].concat(), dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&args, dir.path());
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn audit_tikhonov_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["audit-filters", "--method", "tikhonov", "--jmax", "64", "--assert"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("audit-tikhonov.csv")).unwrap();
    assert_eq!(csv.lines().count(), 65);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn missing_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["sample", "--config", "/nonexistent/config.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config"));
}

#[test]
fn unknown_keys_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("frame-graph.toml");
    let o = run(&["sample", "--config", cfg.to_str().unwrap(), "sed=3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seeed = 1\n[domain]\ntype = \"circle\"\n[kernel]\ntype = \"circle\"\nrate = 1.0\n").unwrap();
    let o = run(&["sample", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn pipeline_artifacts_embed_config_and_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("frame-graph.toml");
    let cfg = cfg.to_str().unwrap();
    for dir in [a.path(), b.path()] {
        for sub in ["sample", "analyze", "reconstruct"] {
            let o = run(&[sub, "--config", cfg, "--n", "64", "--tau", "8", "--seed", "11"], dir);
            assert_eq!(o.status.code(), Some(0), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let samples = dir.join("samples.json");
        let o = run(&["decompose", "--config", cfg, "--seed", "11", "--samples", samples.to_str().unwrap()], dir);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["samples.json", "eigensystem.json", "coefficients.csv", "coefficients.json", "reconstruction.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between identical runs");
    }
    let s = json(&a.path().join("samples.json"));
    assert_eq!(s["config"]["seed"], 11);
    assert_eq!(s["samples"]["points"].as_array().unwrap().len(), 64);
    let e = json(&a.path().join("eigensystem.json"));
    assert_eq!(e["config"]["seed"], 11);
    assert_eq!(e["seed"], s["samples"]["seed"]);
    assert_eq!(json(&a.path().join("coefficients.json"))["tau"], 8);
    let r = json(&a.path().join("reconstruction.json"));
    assert!(r["error"]["value"].as_f64().unwrap() < r["signal_norm"].as_f64().unwrap());
}

#[test]
fn bench_rate_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("end-to-end-graph.toml");
    let o = run(
        &["bench-rate", "--config", cfg.to_str().unwrap(), "trials=4", "n_list=[64, 256, 1024]"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("end-to-end.json"));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["config"]["trials"], 4);
    let csv = std::fs::read_to_string(dir.path().join("end-to-end.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
}
