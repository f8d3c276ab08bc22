use qfhe_lab::branching_program::LayeredBp;
use qfhe_lab::garden_hose::PipeNetwork;
use qfhe_lab::lwe_he::{encrypt_with_mask, LweParams, SecretKey};
use qfhe_lab::ma_program::MaProgram;
use qfhe_lab::resource_estimator::Estimate;
use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn qfhe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qfhe")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qfhe-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn compile_t1_emits_all_stages() {
    let out = qfhe(&["compile", "--builtin", "t1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["metrics"]["m"], 154);
    assert_eq!(v["metrics"]["L"], 4);
    let ma: MaProgram = serde_json::from_value(v["ma"].clone()).unwrap();
    let bp: LayeredBp = serde_json::from_value(v["bp"].clone()).unwrap();
    let gh: PipeNetwork = serde_json::from_value(v["gh"].clone()).unwrap();
    assert_eq!(ma.modulus, 17);
    assert_eq!(bp.layers.len(), 4);
    assert_eq!(gh.pipe_count, 154);
}

#[test]
fn compile_to_directory() {
    let dir = scratch("compile");
    let out = qfhe(&["compile", "--builtin", "t1", "--emit", "dot", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    for f in ["ma.json", "bp.dot", "gh.dot"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn dot_output_is_balanced() {
    let out = qfhe(&["compile", "--builtin", "t1", "--emit", "dot"]);
    assert_eq!(out.status.code(), Some(0));
    let dot = String::from_utf8(out.stdout).unwrap();
    assert!(dot.trim_start().starts_with("graph") || dot.trim_start().starts_with("digraph"));
    assert_eq!(dot.matches('{').count(), dot.matches('}').count());
    assert!(dot.trim_end().ends_with('}'));
}

#[test]
fn malformed_json_is_an_input_error() {
    let dir = scratch("bad");
    let path = dir.join("bad.json");
    std::fs::write(&path, "{\n  \"mask\": [1,\n").unwrap();
    let out = qfhe(&["compile", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:"), "{err}");
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn water_on_t1_exits_at_nine() {
    let v = json(&qfhe(&["run", "--mode", "water", "--builtin", "t1"]));
    assert_eq!(v["exit_state"], 9);
    assert_eq!(v["output"], 1);
    assert_eq!(v["traversed_decorations"], 1);
}

#[test]
fn water_from_ciphertext_file() {
    let sk = SecretKey { bits: vec![0, 1, 1, 0], level: 0 };
    let ct = encrypt_with_mask(&sk, &LweParams::t1(), &[2, 4, 6, 8], -1, 0).unwrap();
    let dir = scratch("ct");
    let path = dir.join("ct.json");
    std::fs::write(&path, serde_json::to_string(&ct).unwrap()).unwrap();
    let p = path.to_str().unwrap();
    let v = json(&qfhe(&["run", "--mode", "water", "--input", p, "--key", "0110"]));
    assert_eq!(v["output"], 0);
    assert_eq!(v["decrypt"], 0);
    assert_eq!(qfhe(&["run", "--mode", "water", "--input", p]).status.code(), Some(2));
    assert_eq!(qfhe(&["run", "--mode", "water", "--input", p, "--key", "01"]).status.code(), Some(2));
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn qfhe_demo_is_reproducible() {
    let a = qfhe(&["run", "--mode", "qfhe-demo", "--seed", "1"]);
    let b = qfhe(&["run", "--mode", "qfhe-demo", "--seed", "1"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(json(&a)["fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);
}

#[test]
fn chain_and_dense_modes() {
    for mode in ["chain", "dense"] {
        let out = qfhe(&["run", "--mode", mode, "--seed", "7"]);
        assert_eq!(out.status.code(), Some(0), "{mode}");
    }
    let v = json(&qfhe(&["run", "--mode", "chain", "--seed", "7", "--data", "zero"]));
    assert_eq!(v["fired"], true);
}

#[test]
fn randomized_modes_need_a_seed() {
    for mode in ["chain", "dense", "qfhe-demo"] {
        assert_eq!(qfhe(&["run", "--mode", mode]).status.code(), Some(2), "{mode}");
    }
}

#[test]
fn eval_circuit_file_and_size_limit() {
    let dir = scratch("eval");
    let ok = dir.join("ok.json");
    std::fs::write(&ok, r#"{"qubit_count": 2, "gates": [{"g": "H", "q": [0]}, {"g": "T", "q": [0]}, {"g": "CNOT", "q": [0, 1]}, {"g": "T", "q": [1]}]}"#).unwrap();
    let out = qfhe(&["eval", "--circuit", ok.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["level"], 2);
    let big = dir.join("big.json");
    std::fs::write(&big, r#"{"qubit_count": 4, "gates": [{"g": "H", "q": [3]}]}"#).unwrap();
    assert_eq!(qfhe(&["eval", "--circuit", big.to_str().unwrap(), "--seed", "3"]).status.code(), Some(3));
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"qubit_count": 1, "gates": [{"g": "Y", "q": [0]}]}"#).unwrap();
    assert_eq!(qfhe(&["eval", "--circuit", bad.to_str().unwrap(), "--seed", "3"]).status.code(), Some(2));
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn estimate_json_round_trips() {
    let out = qfhe(&["estimate", "--scheme", "ours", "--n", "512", "--q", "65536", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let e: Estimate = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(e.value, 1 << 17);
    assert_eq!(qfhe(&["estimate", "--scheme", "barrington", "--n", "4", "--q", "17"]).status.code(), Some(2));
}

#[test]
fn audit_reports_flags() {
    let v = json(&qfhe(&["audit", "--format", "json"]));
    let verdicts: Vec<&str> = v["audit"].as_array().unwrap().iter().map(|l| l["verdict"].as_str().unwrap()).collect();
    assert_eq!(verdicts, ["PASS", "FLAG", "FLAG"]);
    assert_eq!(v["factors"][2]["factor"], 1u64 << 18);
}

#[test]
fn selftest_single_criteria() {
    let ok = qfhe(&["selftest", "--only", "2"]);
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(text.contains("[PASS]  2"));
    assert!(text.contains("control: corrupted accept set detected"));
    // the gate-identity criterion fails on the X^a P^a T ordering
    assert_eq!(qfhe(&["selftest", "--only", "6"]).status.code(), Some(1));
    assert_eq!(qfhe(&["selftest", "--only", "12"]).status.code(), Some(2));
}
