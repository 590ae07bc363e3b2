use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn qunion(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qunion")).current_dir(dir).args(args).output().expect("spawn qunion")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qunion(dir.path(), &["no-such-command"]).status.code(), Some(1));
    assert_eq!(qunion(dir.path(), &["verify-union-bound", "--bogus"]).status.code(), Some(1));
    assert_eq!(qunion(dir.path(), &["dh", "--rho", "missing.json", "--sigma", "missing.json", "--eps", "0.1"]).status.code(), Some(1));
    assert_eq!(qunion(dir.path(), &["second-order", "--triple", "1,1", "--eps", "0.5", "--n-range", "1:2:1"]).status.code(), Some(1));
}

#[test]
fn manifest_digests_match_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = qunion(dir.path(), &["verify-union-bound", "--trials", "50", "--seed", "3", "--out", "ub.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = json(&dir.path().join("ub.manifest.json"));
    assert_eq!(manifest["command"], "verify-union-bound");
    assert_eq!(manifest["master_seed"], 3);
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 1);
    for o in outputs {
        let bytes = std::fs::read(dir.path().join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(o["bytes"].as_u64().unwrap() as usize, bytes.len());
    }
    let csv = std::fs::read_to_string(dir.path().join("ub.csv")).unwrap();
    // default sweep: four grid values plus the optimum when attained
    assert!(csv.lines().count() > 50 * 4);
    assert!(csv.starts_with("trial,lhs,"));
}

#[test]
fn second_order_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = qunion(dir.path(), &["second-order", "--triple", "1,1,1", "--eps", "0.5", "--n-range", "100:1000:100"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("second-order.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "n,lower_bound_bits,per_use_rate");
    assert_eq!(lines.len(), 11);
    let mut last = f64::NEG_INFINITY;
    for line in &lines[1..] {
        let cells: Vec<_> = line.split(',').collect();
        let n: f64 = cells[0].parse().unwrap();
        let lb: f64 = cells[1].parse().unwrap();
        let rate: f64 = cells[2].parse().unwrap();
        assert!(lb > last);
        assert!((rate - lb / n).abs() < 1e-12);
        last = lb;
    }
}

#[test]
fn dh_reports_bracket_and_witness() {
    let dir = tempfile::tempdir().unwrap();
    let diag = |p: [f64; 2]| serde_json::json!({ "dim": 2, "re": [[p[0], 0.0], [0.0, p[1]]] });
    std::fs::write(dir.path().join("rho.json"), diag([0.9, 0.1]).to_string()).unwrap();
    std::fs::write(dir.path().join("sigma.json"), diag([0.5, 0.5]).to_string()).unwrap();
    let out = qunion(dir.path(), &["dh", "--rho", "rho.json", "--sigma", "sigma.json", "--eps", "0.2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("dh.json"));
    // optimal test is (8/9)|0><0|: ρ-weight exactly 0.8, σ-weight 4/9
    let lower = v["lower"].as_f64().unwrap();
    assert!((lower - (9.0f64 / 4.0).log2()).abs() < 1e-9, "{v}");
    assert!(v["upper"].as_f64().unwrap() >= lower - 1e-12);
    assert!(v["witness_tr_rho"].as_f64().unwrap() >= 0.8 - 1e-9);
    assert!(dir.path().join("dh.witness.json").exists());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "threads = 2\n[verify-union-bound]\ntrials = 7\nseed = 5\ndim = [2, 4]\nout = \"cfg.csv\"\n",
    )
    .unwrap();
    let out = qunion(dir.path(), &["--config", "run.toml", "verify-union-bound", "--seed", "9"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = json(&dir.path().join("cfg.manifest.json"));
    assert_eq!(manifest["master_seed"], 9);
    let config = &manifest["config"]["verify-union-bound"];
    assert_eq!(config["trials"], 7);
    assert_eq!(config["dim"], serde_json::json!([2, 4]));
}

#[test]
fn same_seed_same_bytes() {
    let runs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (k, dir) in runs.iter().enumerate() {
        let threads = if k == 0 { "1" } else { "3" };
        let out = qunion(dir.path(), &["--threads", threads, "povm-bound", "--trials", "40", "--seed", "17"]);
        assert!(out.status.success());
    }
    let a = std::fs::read(runs[0].path().join("povm-bound.csv")).unwrap();
    let b = std::fs::read(runs[1].path().join("povm-bound.csv")).unwrap();
    assert_eq!(a, b);
}
