use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blocktext"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, seed: u64) -> PathBuf {
    let out = dir.join(format!("data{seed}"));
    ok(&["generate", "--out", s(&out), "--seed", &seed.to_string()]);
    out
}

fn fit(data: &Path, out: &Path, model: &str, sweeps: u64) {
    ok(&[
        "fit",
        "--edges",
        s(&data.join("edges.tsv")),
        "--docs",
        s(&data.join("docs.tsv")),
        "--model",
        model,
        "--sweeps",
        &sweeps.to_string(),
        "--out",
        s(out),
    ]);
}

#[test]
fn generate_writes_default_dataset() {
    let tmp = TempDir::new().unwrap();
    let data = generate(tmp.path(), 1);
    for f in ["edges.tsv", "docs.tsv", "truth.json", "manifest.json"] {
        assert!(data.join(f).exists(), "{f} missing");
    }
    let edges = fs::read_to_string(data.join("edges.tsv")).unwrap();
    assert_eq!(edges.lines().count(), 249);
    let mut nodes: Vec<&str> = edges.split_whitespace().collect();
    nodes.sort_unstable();
    nodes.dedup();
    assert_eq!(nodes.len(), 70);
}

#[test]
fn generate_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["generate", "--out", s(&a), "--seed", "7"]);
    ok(&["generate", "--out", s(&b), "--seed", "7"]);
    for f in ["edges.tsv", "docs.tsv", "truth.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn generate_reads_key_value_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("synth.cfg");
    fs::write(&cfg, "num_nodes=30\nnum_edges=80\nk_true=4\nactive_pairs=6\nwords_per_node=[0, 4]\ntotal_tokens=null\nvocab_size=40\nphi_concentration=1\n").unwrap();
    let out = tmp.path().join("d");
    ok(&["generate", "--out", s(&out), "--config", s(&cfg)]);
    let edges = fs::read_to_string(out.join("edges.tsv")).unwrap();
    assert_eq!(edges.lines().count(), 80);
}

#[test]
fn unwritable_output_is_io_error() {
    let tmp = TempDir::new().unwrap();
    let file = tmp.path().join("plain");
    fs::write(&file, "x").unwrap();
    let out = run(&["generate", "--out", s(&file.join("sub"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(run(&["fit", "--edges", "x"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let tmp = TempDir::new().unwrap();
    let data = generate(tmp.path(), 2);
    let out = run(&[
        "fit",
        "--edges",
        s(&data.join("edges.tsv")),
        "--model",
        "sb",
        "--alpha",
        "-1",
        "--out",
        s(&tmp.path().join("f")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn edge_only_model_runs_without_docs() {
    let tmp = TempDir::new().unwrap();
    let data = generate(tmp.path(), 3);
    let out = tmp.path().join("fit");
    ok(&["fit", "--edges", s(&data.join("edges.tsv")), "--model", "sb", "--sweeps", "20", "--out", s(&out)]);
    for f in ["snapshot.json", "diagnostics.tsv", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
}

#[test]
fn infinite_model_records_k_trace() {
    let tmp = TempDir::new().unwrap();
    let data = generate(tmp.path(), 4);
    let out = tmp.path().join("fit");
    ok(&[
        "fit",
        "--edges",
        s(&data.join("edges.tsv")),
        "--docs",
        s(&data.join("docs.tsv")),
        "--model",
        "infsbt",
        "--sweeps",
        "50",
        "--alpha",
        "0.05",
        "--beta",
        "0.05",
        "--gamma",
        "0.05",
        "--eta",
        "0.05",
        "--trace-every",
        "10",
        "--out",
        s(&out),
    ]);
    let diag = fs::read_to_string(out.join("diagnostics.tsv")).unwrap();
    let mut lines = diag.lines();
    assert_eq!(lines.next(), Some("sweep\tlog_joint\tk"));
    assert_eq!(lines.count(), 6);
    let snap: serde_json::Value = serde_json::from_slice(&fs::read(out.join("snapshot.json")).unwrap()).unwrap();
    assert_eq!(snap["diagnostics"]["trace"].as_array().unwrap().len(), 6);
}

#[test]
fn fit_is_reproducible_and_resume_matches_one_run() {
    let tmp = TempDir::new().unwrap();
    let data = generate(tmp.path(), 5);
    let full = tmp.path().join("full");
    let again = tmp.path().join("again");
    let half = tmp.path().join("half");
    let rest = tmp.path().join("rest");
    fit(&data, &full, "sbt", 60);
    fit(&data, &again, "sbt", 60);
    assert_eq!(fs::read(full.join("snapshot.json")).unwrap(), fs::read(again.join("snapshot.json")).unwrap());
    fit(&data, &half, "sbt", 25);
    ok(&[
        "fit",
        "--edges",
        s(&data.join("edges.tsv")),
        "--docs",
        s(&data.join("docs.tsv")),
        "--resume",
        s(&half.join("snapshot.json")),
        "--sweeps",
        "60",
        "--out",
        s(&rest),
    ]);
    let a: serde_json::Value = serde_json::from_slice(&fs::read(full.join("snapshot.json")).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&fs::read(rest.join("snapshot.json")).unwrap()).unwrap();
    assert_eq!(a["sweeps_done"], 60);
    assert_eq!(a["edge_assignments"], b["edge_assignments"]);
    assert_eq!(a["word_topics"], b["word_topics"]);
    assert_eq!(a["estimate"], b["estimate"]);
}

#[test]
fn resume_rejects_other_data() {
    let tmp = TempDir::new().unwrap();
    let data = generate(tmp.path(), 6);
    let other = generate(tmp.path(), 8);
    let fitted = tmp.path().join("fit");
    fit(&data, &fitted, "sbt", 5);
    let out = run(&[
        "fit",
        "--edges",
        s(&other.join("edges.tsv")),
        "--docs",
        s(&other.join("docs.tsv")),
        "--resume",
        s(&fitted.join("snapshot.json")),
        "--sweeps",
        "10",
        "--out",
        s(&tmp.path().join("r")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn eval_recovery_rows_and_digest_check() {
    let tmp = TempDir::new().unwrap();
    let data = generate(tmp.path(), 9);
    let fitted = tmp.path().join("fit");
    fit(&data, &fitted, "sbt", 30);
    let report = tmp.path().join("report");
    ok(&[
        "eval",
        "--snapshot",
        s(&fitted.join("snapshot.json")),
        "--edges",
        s(&data.join("edges.tsv")),
        "--docs",
        s(&data.join("docs.tsv")),
        "--truth",
        s(&data.join("truth.json")),
        "--metrics",
        "vi,ae",
        "--out",
        s(&report),
    ]);
    let tsv = fs::read_to_string(report.join("report.tsv")).unwrap();
    let metrics: Vec<&str> = tsv.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap()).collect();
    assert_eq!(metrics, ["net_vi", "topic_vi", "net_ae", "topic_ae"]);
    assert!(report.join("report.json").exists());

    let other = generate(tmp.path(), 10);
    let out = run(&[
        "eval",
        "--snapshot",
        s(&fitted.join("snapshot.json")),
        "--edges",
        s(&other.join("edges.tsv")),
        "--docs",
        s(&data.join("docs.tsv")),
        "--truth",
        s(&data.join("truth.json")),
        "--out",
        s(&tmp.path().join("bad")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    let recorded = &fs::read_to_string(fitted.join("manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(recorded).unwrap();
    let want = manifest["inputs"]["edges"]["sha256"].as_str().unwrap();
    let got = manifest_digest(&other.join("edges.tsv"));
    assert!(msg.contains(want) && msg.contains(&got), "{msg}");
}

fn manifest_digest(path: &Path) -> String {
    let dir = path.parent().unwrap();
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap();
    m["outputs"]["edges"]["sha256"].as_str().unwrap().to_string()
}

#[test]
fn eval_ae_without_truth_fails() {
    let tmp = TempDir::new().unwrap();
    let data = generate(tmp.path(), 11);
    let fitted = tmp.path().join("fit");
    fit(&data, &fitted, "sb", 5);
    let out = run(&[
        "eval",
        "--snapshot",
        s(&fitted.join("snapshot.json")),
        "--edges",
        s(&data.join("edges.tsv")),
        "--metrics",
        "ae",
        "--out",
        s(&tmp.path().join("r")),
    ]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("AE requires ground truth"));
}

#[test]
fn eval_fold_metrics() {
    let tmp = TempDir::new().unwrap();
    let data = generate(tmp.path(), 12);
    let fitted = tmp.path().join("fit");
    fit(&data, &fitted, "sbt", 10);
    let report = tmp.path().join("report");
    ok(&[
        "--jobs",
        "1",
        "eval",
        "--snapshot",
        s(&fitted.join("snapshot.json")),
        "--edges",
        s(&data.join("edges.tsv")),
        "--docs",
        s(&data.join("docs.tsv")),
        "--metrics",
        "rank,auc,ll",
        "--folds",
        "10",
        "--out",
        s(&report),
    ]);
    let tsv = fs::read_to_string(report.join("report.tsv")).unwrap();
    let count = |model: &str, metric: &str| {
        tsv.lines().filter(|l| l.starts_with(&format!("{model}\t{metric}\t"))).count()
    };
    assert_eq!(count("sbt", "rank"), 10);
    assert_eq!(count("sbt", "auc"), 10);
    assert_eq!(count("null", "rank"), 10);
    assert_eq!(count("sbt", "word_ll"), 1);
}

#[test]
fn export_formats() {
    let tmp = TempDir::new().unwrap();
    let data = generate(tmp.path(), 13);
    let fitted = tmp.path().join("fit");
    fit(&data, &fitted, "sbt", 10);
    for format in ["dot", "graphml", "json"] {
        let out = tmp.path().join(format);
        ok(&["export", "--snapshot", s(&fitted.join("snapshot.json")), "--format", format, "--out", s(&out)]);
        let text = fs::read_to_string(out.join(format!("industries.{format}"))).unwrap();
        assert!(!text.is_empty());
        assert!(out.join("manifest.json").exists());
    }
    let dot = fs::read_to_string(tmp.path().join("dot/industries.dot")).unwrap();
    assert_eq!(dot.matches("label=").count(), 16);
    let out = run(&["export", "--snapshot", s(&fitted.join("snapshot.json")), "--format", "svg", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
}
