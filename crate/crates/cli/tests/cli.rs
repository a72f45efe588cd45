use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

use emokit::corpus::{load_annotations, load_labels, EmotionTaxonomy, POD_PRIMARY_CLASSES};
use emokit::relabel::{collect_items, encode_batch};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn toy(name: &str) -> String {
    root().join("fixtures/toy").join(name).display().to_string()
}

fn pod(name: &str) -> String {
    root().join("fixtures/pod").join(name).display().to_string()
}

fn emokit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emokit"))
        .args(args)
        .env_remove("EMOKIT_API_KEY")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = emokit(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn aggregate_writes_labels_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mr.jsonl");
    let loss = dir.path().join("loss.json");
    let stdout = ok(&["aggregate", "--rule", "mr", "--input", &pod("annotations.jsonl"), "--output", s(&out), "--loss-report", s(&loss)]);
    assert!(stdout.contains("1 awaiting relabel"));

    let labels = load_labels(&out, &EmotionTaxonomy::pod_primary()).unwrap();
    assert_eq!(labels.len(), 6);
    assert_eq!(labels.iter().filter(|l| l.is_dropped()).count(), 3);

    // 5 scorable: MR drops p02 and p03, PR drops p02.
    let report = read_json(&loss);
    assert_eq!(report["scorable"], 5);
    assert_eq!(report["rules"][0]["dropped"], 2);
    assert_eq!(report["rules"][1]["dropped"], 1);
    assert_eq!(report["rules"][2]["dropped"], 0);

    let manifest = read_json(&dir.path().join("mr.jsonl.manifest.json"));
    assert_eq!(manifest["subcommand"], "aggregate");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config"]["rule"], "mr");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert!(manifest.get("timestamp").is_none());
}

#[test]
fn manifests_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let m = dir.path().join(format!("{name}.m.json"));
        ok(&["aggregate", "--rule", "ar", "--input", &pod("annotations.jsonl"), "--output", s(&out), "--manifest", s(&m)]);
        let mut v = read_json(&m);
        v["config"]["output"] = Value::Null;
        v["outputs"][0]["path"] = Value::Null;
        v
    };
    assert_eq!(run("a.jsonl"), run("b.jsonl"));
}

#[test]
fn evaluate_reports_fold_score() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("eval.json");
    let base = ["evaluate", "--pred", &toy("predictions.jsonl"), "--gold", &toy("labels.jsonl"), "--taxonomy", &toy("taxonomy.json"), "--plan", &toy("plan.json")];
    let mut args = base.to_vec();
    args.extend(["--fold", "1", "--dataset", "toy", "--out", s(&out)]);
    let stdout = ok(&args);
    assert!(stdout.contains("over 10 samples"), "{stdout}");
    let v = read_json(&out);
    assert_eq!(v["report"]["dataset"], "toy");
    assert_eq!(v["report"]["fold"], 1);
    assert_eq!(v["report"]["n_samples"], 10);
    assert_eq!(v["report"]["macro_f1"], v["score"]["result"]["macro_f1"]);
}

#[test]
fn evaluate_names_missing_utterance() {
    let out = emokit(&[
        "evaluate",
        "--pred", &toy("predictions_missing_u07.jsonl"),
        "--gold", &toy("labels.jsonl"),
        "--taxonomy", &toy("taxonomy.json"),
        "--plan", &toy("plan.json"),
        "--fold", "1",
    ]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "scoring");
    assert!(err["error"]["message"].as_str().unwrap().contains("u07"));
}

#[test]
fn errors_are_json() {
    let out = emokit(&["aggregate", "--rule", "mr", "--input", "/nonexistent/a.jsonl", "--output", "/nonexistent/b.jsonl"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "corpus");
    assert!(!err["error"]["chain"].as_array().unwrap().is_empty());
}

#[test]
fn partition_rejects_unknown_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let out = emokit(&["partition", "--scheme", "msp-9fold", "--input", &pod("annotations.jsonl"), "--output", s(&dir.path().join("p.json"))]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "partition");
}

#[test]
fn train_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let syn = dir.path().join("syn");
    ok(&["synth", "--out", s(&syn), "--per-class", "40"]);
    let features = syn.join("features");
    let labels = syn.join("labels.jsonl");
    let taxonomy = syn.join("taxonomy.json");
    let train = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        ok(&[
            "train", "--seed", seed,
            "--features", s(&features), "--labels", s(&labels), "--taxonomy", s(&taxonomy),
            "--epochs", "5", "--hidden", "32", "--out", s(&out),
        ]);
        std::fs::read(&out).unwrap()
    };
    let a = train("a.json", "7");
    let b = train("b.json", "7");
    let c = train("c.json", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);

    let ck: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(ck["config"]["seed"], 7);
    assert_eq!(ck["history"].as_array().unwrap().len(), 5);
}

#[test]
fn train_then_report_layer_weights() {
    let dir = tempfile::tempdir().unwrap();
    let syn = dir.path().join("syn");
    ok(&["synth", "--out", s(&syn), "--per-class", "20", "--layers", "4"]);
    let ids: Vec<String> = (0..40).map(|i| format!("syn-{i:05}")).collect();
    let plan = dir.path().join("plan.json");
    let fold = json!({"test": ids[..8], "dev": ids[8..16], "train": ids[16..]});
    std::fs::write(&plan, json!({"scheme": "syn", "folds": [fold]}).to_string()).unwrap();
    let cks = dir.path().join("cks");
    std::fs::create_dir(&cks).unwrap();
    for seed in ["1", "2"] {
        let out = cks.join(format!("seed{seed}.json"));
        ok(&[
            "train", "--seed", seed,
            "--features", s(&syn.join("features")), "--labels", s(&syn.join("labels.jsonl")),
            "--taxonomy", s(&syn.join("taxonomy.json")), "--plan", s(&plan), "--fold", "1",
            "--epochs", "3", "--hidden", "16", "--lr", "1e-2", "--out", s(&out),
            "--predictions", s(&dir.path().join(format!("pred{seed}.jsonl"))),
        ]);
    }
    let rep = dir.path().join("layers.json");
    ok(&["report", "--checkpoints", s(&cks), "--out", s(&rep)]);
    let v = read_json(&rep);
    let w: Vec<f64> = serde_json::from_value(v["layers"]["mean_weights"].clone()).unwrap();
    assert_eq!(w.len(), 4);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(v["layers"]["checkpoints"].as_array().unwrap().len(), 2);

    // Test-split predictions score against the same fold.
    let pred = dir.path().join("pred1.jsonl");
    assert_eq!(std::fs::read_to_string(&pred).unwrap().lines().count(), 8);
    let stdout = ok(&[
        "evaluate", "--pred", s(&pred), "--gold", s(&syn.join("labels.jsonl")),
        "--taxonomy", s(&syn.join("taxonomy.json")), "--plan", s(&plan), "--fold", "1",
    ]);
    assert!(stdout.contains("over 8 samples"), "{stdout}");
}

fn entry(d: &[f64]) -> Value {
    let mut m = serde_json::Map::new();
    for (c, v) in POD_PRIMARY_CLASSES.iter().zip(d) {
        m.insert(c.to_string(), json!(v));
    }
    m.insert("reason".into(), json!("typed descriptions"));
    Value::Object(m)
}

#[test]
fn relabel_with_mock_transport_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("ar.jsonl");
    ok(&["aggregate", "--rule", "ar", "--input", &pod("annotations.jsonl"), "--output", s(&labels)]);

    // Record an answer for the single batch: every item moves to happy.
    let tax = EmotionTaxonomy::pod_primary();
    let corpus = load_annotations(Path::new(&pod("annotations.jsonl")), &tax).unwrap();
    let items = collect_items(&corpus, &load_labels(&labels, &tax).unwrap(), &tax).unwrap();
    assert_eq!(items.len(), 4);
    let happy = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
    let answer: serde_json::Map<String, Value> = (0..items.len()).map(|i| (i.to_string(), entry(&happy))).collect();
    let mock = dir.path().join("mock");
    std::fs::create_dir(&mock).unwrap();
    let fixture = json!({"input": encode_batch(&items).unwrap(), "output": Value::Object(answer).to_string()});
    std::fs::write(mock.join("batch0.json"), fixture.to_string()).unwrap();

    let merged = dir.path().join("merged.jsonl");
    let artifact = dir.path().join("artifact.jsonl");
    let state = dir.path().join("state.json");
    let args = [
        "relabel", "--input", &pod("annotations.jsonl"), "--labels", s(&labels), "--mock", s(&mock),
        "--output", s(&merged), "--artifact", s(&artifact), "--state", s(&state),
    ];
    let stdout = ok(&args);
    assert!(stdout.contains("1 requests, 0 fallbacks, 4 of 4 modified"), "{stdout}");
    let out = load_labels(&merged, &tax).unwrap();
    for id in ["p01", "p02", "p04", "p05"] {
        let l = out.iter().find(|l| l.utterance_id == id).unwrap();
        assert_eq!(l.target(&tax).unwrap(), happy.to_vec(), "{id}");
    }
    let p06 = out.iter().find(|l| l.utterance_id == "p06").unwrap();
    assert_ne!(p06.target(&tax).unwrap(), happy.to_vec());
    assert_eq!(std::fs::read_to_string(&artifact).unwrap().lines().count(), 4);

    // Rerun with an empty mock: everything comes from the state file.
    std::fs::remove_file(mock.join("batch0.json")).unwrap();
    let stdout = ok(&args);
    assert!(stdout.contains("0 requests, 0 fallbacks, 4 of 4 modified"), "{stdout}");
    assert_eq!(load_labels(&merged, &tax).unwrap(), out);
}

#[test]
fn relabel_falls_back_without_answers() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("ar.jsonl");
    ok(&["aggregate", "--rule", "ar", "--input", &pod("annotations.jsonl"), "--output", s(&labels)]);
    let mock = dir.path().join("mock");
    std::fs::create_dir(&mock).unwrap();
    let merged = dir.path().join("merged.jsonl");
    let stdout = ok(&[
        "relabel", "--input", &pod("annotations.jsonl"), "--labels", s(&labels), "--mock", s(&mock),
        "--max-retries", "1", "--output", s(&merged),
    ]);
    assert!(stdout.contains("4 fallbacks, 0 of 4 modified"), "{stdout}");
    // The typed-only utterance gets its uniform reference instead of staying dropped.
    let tax = EmotionTaxonomy::pod_primary();
    let out = load_labels(&merged, &tax).unwrap();
    let p04 = out.iter().find(|l| l.utterance_id == "p04").unwrap();
    assert_eq!(p04.target(&tax).unwrap(), vec![0.125; 8]);
}

#[test]
fn relabel_without_key_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("ar.jsonl");
    ok(&["aggregate", "--rule", "ar", "--input", &pod("annotations.jsonl"), "--output", s(&labels)]);
    let out = emokit(&["relabel", "--input", &pod("annotations.jsonl"), "--labels", s(&labels)]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"].as_str().unwrap().contains("EMOKIT_API_KEY"));
}
