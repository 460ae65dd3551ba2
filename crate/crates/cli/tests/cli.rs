use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn adsb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adsb")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic model shared by the tests that need the experience engine.
fn model() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    let dir = DIR.get_or_init(|| {
        let d = tempfile::tempdir().unwrap();
        let data = d.path().join("syn.jsonl");
        let model = d.path().join("model.json");
        assert!(adsb(&["synth", "--n", "1500", "--seed", "3", "--out", path(&data)]).status.success());
        let out = adsb(&["train", "--data", path(&data), "--out", path(&model), "--trees", "40"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        d
    });
    Box::leak(dir.path().join("model.json").into_boxed_path())
}

#[test]
fn gate_exit_codes_follow_the_verdict() {
    let safe = fixture("safe_scene.json");
    let go = adsb(&["gate", "--current", path(&safe), "--proposed", path(&safe)]);
    assert_eq!(go.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&go.stdout).starts_with("GO"));

    let tail = fixture("tailgate_scene.json");
    let inhibit = adsb(&["gate", "--current", path(&safe), "--proposed", path(&tail), "--model", path(model())]);
    assert_eq!(inhibit.status.code(), Some(2));

    let close = fixture("close_call_scene.json");
    let cancel = adsb(&["gate", "--current", path(&safe), "--proposed", path(&close), "--model", path(model())]);
    assert_eq!(cancel.status.code(), Some(3), "{}", String::from_utf8_lossy(&cancel.stdout));
}

#[test]
fn degraded_gate_never_cancels() {
    let safe = fixture("safe_scene.json");
    let close = fixture("close_call_scene.json");
    let out = adsb(&["gate", "--format", "json", "--current", path(&safe), "--proposed", path(&close)]);
    assert_eq!(out.status.code(), Some(2));
    let d = json(&out);
    assert_eq!(d["verdict"], "INHIBIT");
    assert_eq!(d["fail_soft"], true);
    assert_eq!(d["unavailable"], serde_json::json!(["ere"]));
}

#[test]
fn disabling_every_engine_is_go() {
    let close = fixture("close_call_scene.json");
    let out = adsb(&["gate", "--current", path(&close), "--proposed", path(&close), "--disable", "cie,gvk"]);
    assert_eq!(out.status.code(), Some(0));
    let bad = adsb(&["gate", "--current", path(&close), "--proposed", path(&close), "--disable", "radar"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn infer_reproduces_the_example_queries() {
    let out = adsb(&["infer", "--format", "json", "a ball is rolling at the intersection", "--relation", "HappensAfter"]);
    let tails: Vec<String> = json(&out).as_array().unwrap().iter().map(|i| i["tail"]["raw_text"].as_str().unwrap().to_string()).collect();
    assert_eq!(tails, vec!["car hits a person", "car hits the football"]);
    let out = adsb(&["infer", "--format", "json", "x is chasing a ball", "--relation", "XNeed"]);
    assert_eq!(json(&out).as_array().unwrap().len(), 2);
    let bad = adsb(&["infer", "x is chasing a ball", "--relation", "Teleports"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn infer_with_hops_prints_chains() {
    let out = adsb(&["infer", "vehicle Y enters the exit-only lane", "--hops", "3"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("2 hop(s)"), "{text}");
    assert!(text.contains("brakes or changes lane"));
}

#[test]
fn simulate_cites_chain_evidence() {
    let out = adsb(&["simulate", "--format", "json", path(&fixture("ball_scenario.json"))]);
    assert!(out.status.success());
    let v = json(&out);
    let steps = v[0]["report"]["decisions"].as_array().unwrap().clone();
    assert_eq!(steps.len(), 2);
    assert_eq!(steps[0]["decision"]["verdict"], "GO");
    let reason = &steps[1]["decision"]["reasons"][0];
    assert_eq!(reason["engine"], "cie");
    assert_eq!(reason["detail"]["hazard_event"], "car hits a person");
    assert!(!reason["detail"]["evidence"].as_array().unwrap().is_empty());
    let again = adsb(&["simulate", "--format", "json", path(&fixture("ball_scenario.json"))]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn advise_notes_the_lorry_no_zone_and_ignores_unknown_profile_keys() {
    let out = adsb(&[
        "advise",
        "--format",
        "json",
        "--scene",
        path(&fixture("lorry_scene.json")),
        "--profile",
        path(&fixture("truck_profile.json")),
    ]);
    assert!(out.status.success());
    let a = json(&out);
    assert!(a["surrounding_pattern_notes"][0].as_str().unwrap().starts_with("pattern.no_zone"));
    assert_eq!(a["ignored_profile"], serde_json::json!(["licence_location"]));
    assert!(a["safe_speed"].as_f64().unwrap() > 0.0);
}

#[test]
fn assess_reports_behavior_rules() {
    let out = adsb(&[
        "assess",
        "--format",
        "json",
        "--scene",
        path(&fixture("safe_scene.json")),
        "--events",
        path(&fixture("turn_events.json")),
    ]);
    let a = json(&out);
    assert_eq!(a["overall_risk"], "hazard");
    assert_eq!(a["ere"]["status"], "unavailable");
    assert_eq!(a["findings"][0]["detail"]["rule_id"], "interaction.indication_lead");
}

#[test]
fn ingest_train_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds.jsonl");
    let issues = dir.path().join("issues.jsonl");
    let files: Vec<String> = ["accident.csv", "vehicle.csv", "person.csv"]
        .iter()
        .map(|f| format!("2019:{}", path(&fixture("fars2019").join(f))))
        .collect();
    let mut args = vec!["ingest", "--format", "json", "--out", path(&ds), "--issues", path(&issues)];
    args.extend(files.iter().map(String::as_str));
    let out = adsb(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&out);
    assert_eq!((s["cases"].as_u64(), s["malformed_rows"].as_u64()), (Some(3), Some(1)));
    assert_eq!(std::fs::read_to_string(&issues).unwrap().lines().count(), 1);

    // A handful of near-identical real cases must still train into a loadable model.
    let tiny_model = dir.path().join("tiny.json");
    let tiny_holdout = dir.path().join("tiny_holdout.jsonl");
    let out = adsb(&[
        "train", "--data", path(&ds), "--out", path(&tiny_model), "--holdout-fraction", "0.2", "--holdout-out", path(&tiny_holdout),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = adsb(&["evaluate", "--format", "json", "--model", path(&tiny_model), "--holdout", path(&tiny_holdout)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["severe"]["total"], 1);

    let syn = dir.path().join("syn.jsonl");
    let model = dir.path().join("m.json");
    let holdout = dir.path().join("h.jsonl");
    assert!(adsb(&["synth", "--n", "1000", "--seed", "5", "--out", path(&syn)]).status.success());
    let out = adsb(&[
        "train", "--data", path(&syn), "--out", path(&model), "--seed", "5", "--k", "8", "--trees", "30",
        "--holdout-fraction", "0.2", "--holdout-out", path(&holdout),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = adsb(&["evaluate", "--format", "json", "--model", path(&model), "--holdout", path(&holdout)]);
    let e = json(&out);
    assert_eq!(e["severe"]["total"], 200);
    assert!(e["severe"]["accuracy"].as_f64().unwrap() >= 0.9);
    let text = adsb(&["evaluate", "--model", path(&model), "--holdout", path(&holdout)]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("weighted avg"));
}

#[test]
fn missing_files_fail_cleanly() {
    let out = adsb(&["assess", "--scene", "/nonexistent/scene.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("opening /nonexistent/scene.json"));
}
