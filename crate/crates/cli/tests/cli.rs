use std::path::Path;
use std::process::{Command, Output};

fn spdhg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spdhg")).args(args).output().expect("spawn spdhg")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn train_args<'a>(out: &'a str, iters: &'a str, every: &'a str) -> Vec<&'a str> {
    vec![
        "train", "--toy", "--toy-n", "60", "--toy-d", "8", "--lambda", "0.05", "--iters", iters,
        "--checkpoint-every", every, "--seed", "3", "--clock", "none", "--out", out,
    ]
}

#[test]
fn missing_input_is_a_usage_error() {
    let out = spdhg(&["train", "--data", "/nonexistent/data.svm"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/data.svm"));
}

#[test]
fn zero_trials_is_rejected() {
    let out = spdhg(&["validate-hp", "--toy", "--trials", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn strongly_convex_regime_needs_ridge_model() {
    let out = spdhg(&["train", "--toy", "--regime", "sc-uniform"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trace_has_one_row_per_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "t.csv");
    let res = spdhg(&train_args(&out, "1000", "50"));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "iter,epoch,objective,test_loss,gap,elapsed_ms");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1000 / 50 + 1);
    assert!(rows[0].starts_with("0,"));
    assert!(rows.last().unwrap().starts_with("1000,"));
}

#[test]
fn manifest_replay_reproduces_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "run.csv");
    assert!(spdhg(&train_args(&out, "400", "40")).status.success());
    let first = std::fs::read(&out).unwrap();
    let manifest = path(dir.path(), "run.manifest.json");
    assert!(Path::new(&manifest).exists());
    std::fs::remove_file(&out).unwrap();
    let res = spdhg(&["train", "--manifest", &manifest]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(std::fs::read(&out).unwrap(), first);

    // a manifest cannot be replayed under a different command
    assert_eq!(spdhg(&["compare", "--manifest", &manifest]).status.code(), Some(2));
}

#[test]
fn compare_writes_one_block_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "cmp.csv");
    let res = spdhg(&[
        "compare", "--toy", "--toy-n", "40", "--toy-d", "6", "--lambda", "0.05", "--solver", "spdhg,lpdhg,gadmm",
        "--epochs", "3", "--repetitions", "2", "--jobs", "2", "--clock", "none", "--out", &out,
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("method,"));
    let mut methods: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    // epochs 0..=3 for each method
    assert_eq!(methods.len(), 3 * 4);
    methods.dedup();
    assert_eq!(methods, ["spdhg-gc", "lpdhg-gc", "gadmm-gc"]);
}

#[test]
fn make_graph_links_duplicated_columns() {
    let dir = tempfile::tempdir().unwrap();
    let data = path(dir.path(), "dup.svm");
    // columns 1 and 2 are identical; column 3 is unrelated
    std::fs::write(&data, "+1 1:1 2:1 3:0.2\n-1 1:-1 2:-1 3:0.9\n+1 1:0.5 2:0.5 3:-0.4\n-1 1:2 2:2 3:0.1\n").unwrap();
    let (a, b) = (path(dir.path(), "a.txt"), path(dir.path(), "b.txt"));
    for out in [&a, &b] {
        let res = spdhg(&["make-graph", "--data", &data, "--graph-threshold", "0.99", "--out", out]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let edges: Vec<&str> = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).collect();
    assert_eq!(edges.len(), 1);
    let mut parts = edges[0].split_whitespace();
    assert_eq!((parts.next(), parts.next()), (Some("0"), Some("1")));
}

#[test]
fn validate_hp_writes_report_per_omega() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "hp");
    let res = spdhg(&[
        "validate-hp", "--toy", "--toy-n", "40", "--toy-d", "6", "--lambda", "0.05", "--iters", "200",
        "--trials", "10", "--omega", "1,2.5", "--out", &out,
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for name in ["tail-gc-omega1.json", "tail-gc-omega2p5.json", "manifest.json"] {
        assert!(Path::new(&out).join(name).exists(), "{name}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(Path::new(&out).join("tail-gc-omega1.json")).unwrap()).unwrap();
    assert_eq!(report["trials"], 10);
}
