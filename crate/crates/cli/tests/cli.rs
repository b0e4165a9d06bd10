use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use amused_core::store::Store;
use serde_json::Value;

const NOW: &str = "2021-03-01T12:00:00Z";

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/golden")
}

fn amused(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amused"))
        .args(["-q", "--now", NOW])
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = amused(args);
    assert!(
        out.status.success(),
        "amused {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_equals_stage_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let config = golden().join("run.json");
    let report = json(&["run", "--config", s(&config), "--store", s(&a)]);
    assert_eq!(report["articles"], 40);
    assert_eq!(report["links"], 120);
    assert_eq!(report["unique_posts"], 100);
    assert_eq!(report["labeled"], 100);

    let sources = golden().join("sources");
    for m in ["poynter.manifest.json", "snopes.manifest.json"] {
        ok(&["ingest", "--manifest", s(&sources.join(m)), "--store", s(&b)]);
    }
    ok(&["langdetect", "--store", s(&b)]);
    let extract = json(&["extract", "--store", s(&b)]);
    assert_eq!(extract["links"], 120);
    let fetch = json(&["fetch", "--store", s(&b), "--fixtures", s(&golden().join("posts"))]);
    assert_eq!(
        (fetch["fetched"].as_u64(), fetch["deleted"].as_u64()),
        (Some(90), Some(10))
    );
    ok(&["label", "--store", s(&b)]);
    ok(&["dedupe", "--store", s(&b)]);

    let dump_a = Store::open(&a).unwrap().canonical_dump();
    let dump_b = Store::open(&b).unwrap().canonical_dump();
    assert!(dump_a == dump_b, "run and stage-by-stage stores differ");
}

#[test]
fn rerun_reports_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let config = golden().join("run.json");
    json(&["run", "--config", s(&config), "--store", s(&store)]);
    let again = json(&["run", "--config", s(&config), "--store", s(&store)]);
    for (k, v) in again.as_object().unwrap() {
        assert_eq!(v, 0, "{k} changed on rerun");
    }
}

#[test]
fn missing_fixtures_is_config_invalid() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    let manifest = golden().join("sources/poynter.manifest.json");
    std::fs::write(
        &config,
        serde_json::json!({"manifests": [manifest], "fixtures": "no-such-dir", "store": "store"}).to_string(),
    )
    .unwrap();
    let out = amused(&["run", "--config", s(&config)]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("invalid config"), "{err}");
    assert!(err.contains("no-such-dir"), "{err}");
    assert!(!dir.path().join("store").exists());

    // A flag pointing at real fixtures wins over the config.
    let store = dir.path().join("s2");
    let report = json(&[
        "run",
        "--config",
        s(&config),
        "--fixtures",
        s(&golden().join("posts")),
        "--store",
        s(&store),
    ]);
    assert_eq!(report["articles"], 30);
}

#[test]
fn reports_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    json(&["run", "--config", s(&golden().join("run.json")), "--store", s(&store)]);

    let csv = ok(&["report", "--store", s(&store), "--kind", "platform", "--format", "csv"]);
    let want = std::fs::read_to_string(golden().join("expected/platform_summary.csv")).unwrap();
    assert_eq!(csv, want);
    let table = ok(&["report", "--store", s(&store), "--kind", "class"]);
    let header: Vec<&str> = table.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["platform", "false", "partially_false", "other", "true"]);
    assert!(table.lines().nth(1).unwrap().starts_with("--------"));
    let timeline = ok(&["report", "--store", s(&store), "--kind", "timeline", "--format", "json"]);
    let rows: Vec<Value> = serde_json::from_str(&timeline).unwrap();
    let mut platforms: Vec<&str> = rows.iter().map(|r| r["platform"].as_str().unwrap()).collect();
    platforms.dedup();
    assert_eq!(platforms, ["twitter", "youtube"]);
    let cov: Vec<Value> = serde_json::from_str(&ok(&[
        "report",
        "--store",
        s(&store),
        "--kind",
        "coverage",
        "--format",
        "json",
    ]))
    .unwrap();
    assert_eq!(cov[0]["articles_with_links"], 22);

    let out = dir.path().join("corpus.jsonl");
    let summary = json(&["export", "--store", s(&store), "--out", s(&out)]);
    assert_eq!(summary["records"], 90);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 90);
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    let keys: Vec<&str> = first.as_object().unwrap().keys().map(String::as_str).collect();
    assert!(keys.contains(&"label_norm") && keys.contains(&"text_content") && keys.contains(&"title"));

    let confirmed = dir.path().join("confirmed.jsonl");
    let summary = json(&[
        "export",
        "--store",
        s(&store),
        "--out",
        s(&confirmed),
        "--confirmed-only",
    ]);
    assert_eq!(summary["records"], 0);
}

#[test]
fn sampling_is_reproducible_across_fresh_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut task_sets = Vec::new();
    for name in ["x", "y"] {
        let store = dir.path().join(name);
        json(&["run", "--config", s(&golden().join("run.json")), "--store", s(&store)]);
        let tasks = json(&["sample", "--store", s(&store), "--rate", "0.1", "--seed", "42"]);
        task_sets.push(tasks);
    }
    assert_eq!(task_sets[0], task_sets[1]);
    assert_eq!(task_sets[0].as_array().unwrap().len(), 16);
    let other = dir.path().join("z");
    json(&["run", "--config", s(&golden().join("run.json")), "--store", s(&other)]);
    let tasks = json(&["sample", "--store", s(&other), "--rate", "0.1", "--seed", "43"]);
    assert_ne!(tasks, task_sets[0]);
}

#[test]
fn usage_errors_exit_nonzero() {
    let out = amused(&["report", "--store", "x", "--kind", "nonsense"]);
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    let out = amused(&["fetch", "--store", "x"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--fixtures"));
}
