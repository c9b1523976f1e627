use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn glutos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glutos")).args(args).env_remove("GLUTOS_BOUND").output().expect("binary runs")
}

fn json(args: &[&str]) -> (Value, i32) {
    let mut all = vec!["--format", "json"];
    all.extend_from_slice(args);
    let out = glutos(&all);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)));
    (v, out.status.code().unwrap())
}

fn statuses(report: &Value) -> Vec<(String, String)> {
    report["sections"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|s| s["checks"].as_array().unwrap())
        .map(|c| (c["id"].as_str().unwrap().to_string(), c["status"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn topos_fragment_passes_the_glutos_suite() {
    let (r, code) = json(&["check", "--suite", "glutos", "--target", "topos"]);
    assert_eq!(r["schema"], "glutos-report/1");
    assert_eq!(code, 0);
    assert!(statuses(&r).iter().all(|(_, s)| s == "pass"));
}

#[test]
fn arrow_closure_collapses_to_terminal() {
    let (r, code) = json(&["complete-sub", "--site", "arrow", "--depth", "8"]);
    assert_eq!(code, 0);
    let y = &r["sections"][0]["data"]["yoneda"];
    for x in ["a", "b"] {
        assert_eq!(y["images"][x]["terminal"], true);
    }
    assert_eq!(y["injective_on_objects"], false);
    assert_eq!(y["fully_faithful"], false);
}

#[test]
fn operator_laws_on_the_frame() {
    let (r, code) = json(&["operators", "--verify-rels", "--site", "disc2"]);
    assert_eq!(code, 0);
    assert_eq!(statuses(&r).len(), 9);
}

#[test]
fn failing_verdict_sets_exit_status() {
    let (r, code) = json(&["check", "--suite", "pretopology", "--target", "arrow"]);
    assert_eq!(code, 1);
    assert_eq!(r["passed"], false);
    assert!(statuses(&r).contains(&("subcanonical".into(), "fail".into())));
}

#[test]
fn reports_are_byte_stable() {
    let args = ["--format", "json", "--seed", "5", "glue", "--local-pullback", "--trials", "50"];
    let a = glutos(&args);
    let b = glutos(&args);
    assert_eq!(a.stdout, b.stdout);
    let text = ["check", "--target", "disc2"];
    assert_eq!(glutos(&text).stdout, glutos(&text).stdout);
}

#[test]
fn bound_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_glutos"))
        .args(["--format", "json", "operators", "--site", "chain3"])
        .env("GLUTOS_BOUND", "3")
        .output()
        .unwrap();
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["params"]["bound"], 3);
}

#[test]
fn bundle_loads_and_drives_commands() {
    let w = data("bundle.json");
    let w = w.to_str().unwrap();
    let (r, code) = json(&["-w", w, "glue", "--gluon", "halves"]);
    assert_eq!(code, 0, "{r}");
    let (r, code) = json(&["-w", w, "nglu", "--sheaf", "two-over-l"]);
    assert_eq!(code, 0, "{r}");
    let (r, _) = json(&["-w", w, "check", "--suite", "pretopology", "--target", "vee-trivial"]);
    assert!(statuses(&r).iter().take(5).all(|(_, s)| s == "pass"));
}

#[test]
fn atlas_of_a_point_leaves_the_top_uncovered() {
    let w = data("bundle.json");
    let (r, code) = json(&["-w", w.to_str().unwrap(), "atlas", "--source", "point", "--target", "disc2", "--functor", "top-to-l"]);
    assert_eq!(code, 1);
    let missing = &r["sections"][1]["data"]["without_atlas"];
    assert_eq!(missing, &serde_json::json!(["r", "T"]));
    assert!(statuses(&r).contains(&("universality".into(), "inapplicable".into())));
}

#[test]
fn finite_set_atlases_pass_universality() {
    let (r, code) = json(&["atlas", "--source", "sets1", "--target", "sets2", "--epi", "surjective"]);
    assert_eq!(code, 0, "{r}");
    let ids: Vec<String> = statuses(&r).into_iter().map(|(id, _)| id).collect();
    for clause in ["fully-faithful", "reflects-coverings", "locally-reflects-clopens", "covered-by-image"] {
        assert!(ids.iter().any(|i| i == clause));
    }
}

#[test]
fn workspace_errors_exit_with_two() {
    for (file, kind) in [("dangling.json", "validation error"), ("unresolved.json", "unresolved name")] {
        let out = glutos(&["-w", data(file).to_str().unwrap(), "report"]);
        assert_eq!(out.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&out.stderr).contains(kind));
    }
}

#[test]
fn unknown_commands_are_rejected() {
    let out = glutos(&["frobnicate"]);
    assert!(!out.status.success());
}
