use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn vrm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vrm")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

const SINGLE: &str = r#"{"m": 1,
 "requests": [{"id": 1, "pos": "0", "arrival": "0"}],
 "servers": [{"id": 1, "pos": "4", "arrival": "0"}]}"#;

const TWO_BY_TWO: &str = r#"{"requests": [{"id": 1, "pos": "0", "arrival": "0"}, {"id": 2, "pos": "0", "arrival": "0"}],
 "servers": [{"id": 1, "pos": "1", "arrival": "0"}, {"id": 2, "pos": "10", "arrival": "0"}]}"#;

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = path(dir, name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn run_reports_costs_and_writes_trace() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "single.json", SINGLE);
    let trace = path(&dir, "trace.jsonl");
    let solution = path(&dir, "solution.json");
    let out = vrm(&["run", "--instance", &inst, "--gamma", "3", "--trace", &trace, "--solution", &solution]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["cost_vrm"], "12");
    assert_eq!(report["cost_opt"], "4");
    assert_eq!(report["ratio"], "3");
    assert_eq!(report["audit"]["status"], "passed");
    let lines: Vec<Value> =
        fs::read_to_string(&trace).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[2]["kind"], "AU");
    assert_eq!(lines[2]["time"], "4");
    let sol: Value = serde_json::from_slice(&fs::read(&solution).unwrap()).unwrap();
    assert_eq!(sol["total"], "12");
}

#[test]
fn decimal_digits_apply_to_reports() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "single.json", SINGLE);
    let out = vrm(&["--decimal-digits", "2", "run", "--instance", &inst, "--gamma", "3/2"]);
    assert_eq!(code(&out), 0);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["gamma"], "1.50");
}

#[test]
fn compare_tabulates_all_algorithms() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "two.json", TWO_BY_TWO);
    let out = vrm(&["compare", "--instance", &inst, "--bruteforce"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let cost = |name: &str| -> String {
        let row = text.lines().find(|l| l.split_whitespace().next() == Some(name)).unwrap();
        row.split_whitespace().nth(1).unwrap().to_string()
    };
    assert_eq!(cost("vrm"), "33");
    assert_eq!(cost("opt"), "11");
    assert_eq!(cost("greedy"), "22");
    assert_eq!(cost("opt_bruteforce"), "11");
}

#[test]
fn gen_is_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = path(&dir, "a.json");
    let b = path(&dir, "b.json");
    for p in [&a, &b] {
        assert_eq!(code(&vrm(&["gen", "--family", "uniform", "--m", "5", "--seed", "7", "-o", p])), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let out = vrm(&["run", "--instance", &a]);
    assert_eq!(code(&out), 0);
}

#[test]
fn verify_small_suite_passes() {
    let dir = TempDir::new().unwrap();
    let report = path(&dir, "report.json");
    let out = vrm(&["verify", "--suite", "small", "--seed", "1", "--count", "40", "--report", &report]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r: Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["instances"], 40);
    assert_eq!(r["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn scaling_writes_csv_and_enforces_baseline() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "scaling.csv");
    let baseline = path(&dir, "baseline.json");
    let args = ["scaling", "--m-grid", "2,4,8", "--per-point", "2", "--seed", "3", "-o", &csv];
    let mut first = args.to_vec();
    first.extend(["--record-baseline", &baseline]);
    assert_eq!(code(&vrm(&first)), 0);
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 3);
    assert!(text.starts_with("schema_version,family,m,instances,max_ratio,mean_ratio,normalized_max_ratio"));

    let mut again = args.to_vec();
    again.extend(["--baseline", &baseline]);
    assert_eq!(code(&vrm(&again)), 0);

    // Lower every recorded ratio below 1 so that the sweep must exceed it.
    let mut b: Value = serde_json::from_slice(&fs::read(&baseline).unwrap()).unwrap();
    for p in b["points"].as_array_mut().unwrap() {
        p["max_ratio"] = Value::from("1/2");
    }
    fs::write(&baseline, serde_json::to_vec(&b).unwrap()).unwrap();
    assert_eq!(code(&vrm(&again)), 6);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&vrm(&["frobnicate"])), 2);
    assert_eq!(code(&vrm(&["run"])), 2);
    assert_eq!(code(&vrm(&["--help"])), 0);

    let missing = path(&dir, "missing.json");
    assert!(!Path::new(&missing).exists());
    assert_eq!(code(&vrm(&["run", "--instance", &missing])), 3);

    let bad = write(&dir, "bad.json", r#"{"requests": [], "servers": [{"id": 1}]}"#);
    assert_eq!(code(&vrm(&["run", "--instance", &bad])), 4);
    let inst = write(&dir, "single.json", SINGLE);
    assert_eq!(code(&vrm(&["run", "--instance", &inst, "--gamma", "abc"])), 4);
    assert_eq!(code(&vrm(&["run", "--instance", &inst, "--gamma", "1"])), 2);

    let big = path(&dir, "big.json");
    assert_eq!(code(&vrm(&["gen", "--family", "clustered", "--m", "9", "-o", &big])), 0);
    assert_eq!(code(&vrm(&["compare", "--instance", &big, "--bruteforce"])), 5);
    assert_eq!(code(&vrm(&["gen", "--family", "poisson", "--m", "3", "--rate", "0", "-o", &big])), 2);
}
