use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scalarprobe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = bin(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fixture() -> String {
    format!("{}/../core/tests/fixtures/comments.jsonl", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn file_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let stats = ok(&["extract", "--corpus", &fixture(), "--out", p(&d("items.jsonl"))]);
    assert!(stats.contains("\"items\": 37"), "{stats}");
    assert!(ok(&["build-mlm", "--items", p(&d("items.jsonl")), "--out", p(&d("inst.jsonl"))]).contains("instances"));
    ok(&["probe-mlm", "--instances", p(&d("inst.jsonl")), "--out", p(&d("mlm.jsonl"))]);

    assert_eq!(ok(&["build-entailment", "--out", p(&d("ent.jsonl"))]).trim(), "46080 items");
    let rb = ok(&["random-baseline", "--items", p(&d("ent.jsonl")), "--seed", "0", "--variant", "with-neg", "--out", p(&d("rb.jsonl"))]);
    assert!(rb.starts_with("WITH_NEG: accuracy 0.4"), "{rb}");
    ok(&["build-nli", "--items", p(&d("ent.jsonl")), "--seed", "1", "--out", p(&d("nli.jsonl"))]);
    ok(&["probe-nli", "--pairs", p(&d("nli.jsonl")), "--out", p(&d("nliv.jsonl"))]);
    ok(&["probe-remote", "--items", p(&d("ent.jsonl")), "--sample", "128", "--seed", "3", "--out", p(&d("rem.jsonl"))]);
    let lines = std::fs::read_to_string(d("rem.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 256);
}

#[test]
fn sequential_flag_gives_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let ent = dir.path().join("ent.jsonl");
    ok(&["build-entailment", "--out", p(&ent)]);
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    ok(&["random-baseline", "--items", p(&ent), "--seed", "5", "--out", p(&a)]);
    ok(&["--sequential", "random-baseline", "--items", p(&ent), "--seed", "5", "--out", p(&b)]);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn rank_prints_all_methods() {
    let out = ok(&["rank", "--method", "adjdiff"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
}

#[test]
fn run_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    ok(&["run", "--probe", "mlm,ranking", "--seed", "2", "--out", p(&run_dir)]);
    assert!(run_dir.join("manifest.json").is_file());
    let text = ok(&["report", "--run", p(&run_dir), "--out", p(&dir.path().join("t"))]);
    assert!(text.contains("ranking"));
    assert!(dir.path().join("t/mlm.csv").is_file());

    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!("output_dir = {:?}\nmodel = \"mock\"\nprobes = [\"ranking\"]\nseed = 1\n", p(&dir.path().join("c"))),
    )
    .unwrap();
    ok(&["run", "--config", p(&cfg)]);
}

#[test]
fn failures_exit_nonzero() {
    let out = bin(&["run", "--seed", "1"]);
    assert!(!out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "output_dir = \"x\"\nmodel = \"mock\"\nprobes = [\"mlm\"]\n").unwrap();
    let out = bin(&["run", "--config", p(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    let out = bin(&["build-mlm", "--items", "/no/such/file.jsonl", "--out", p(&dir.path().join("o"))]);
    assert!(!out.status.success());
    let out = bin(&["probe-remote", "--items", p(&cfg), "--seed", "1", "--out", "o"]);
    assert!(!out.status.success());
}
