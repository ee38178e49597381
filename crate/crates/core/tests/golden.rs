//! Golden outputs of a fixed mock run. Regenerate with `UPDATE_GOLDEN=1 cargo test --test golden`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use scalarprobe::report::{run, ProbeKind, RunConfig};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn check(name: &str, actual: &str) {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden mismatch for {name}");
}

#[test]
fn mock_run_tables_and_heatmaps() {
    let dir = tempfile::tempdir().unwrap();
    let probes = vec![
        ProbeKind::Mlm,
        ProbeKind::Ranking,
        ProbeKind::Entailment,
        ProbeKind::RandomBaseline,
        ProbeKind::Nli,
    ];
    let out = run(&RunConfig::new(dir.path().join("run"), "mock", probes, 11)).unwrap();
    let tables = out.output_dir.join("tables");
    let mut csvs: Vec<_> = std::fs::read_dir(&tables)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    csvs.sort();
    assert!(csvs.len() >= 6, "{csvs:?}");
    for p in &csvs {
        let name = p.file_name().unwrap().to_str().unwrap();
        check(name, &std::fs::read_to_string(p).unwrap());
    }
    let hashes: BTreeMap<_, _> = out.manifest.heatmaps.clone();
    assert_eq!(hashes.len(), 2);
    check("heatmaps.json", &(serde_json::to_string_pretty(&hashes).unwrap() + "\n"));
}
