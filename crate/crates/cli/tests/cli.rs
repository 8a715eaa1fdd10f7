use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> String {
    root().join("fixtures").join(name).display().to_string()
}

fn matchforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matchforge"))
        .args(args)
        .env_remove("MATCHFORGE_MAX_GROUND")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Runs with `--format json`, validates the report against the shipped
/// schema, and returns the exit code and document.
fn json(args: &[&str]) -> (i32, Value) {
    let mut all = vec!["--format", "json"];
    all.extend_from_slice(args);
    let out = matchforge(&all);
    let doc: Value = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)));
    let schema: Value =
        serde_json::from_slice(&std::fs::read(root().join("docs/report.schema.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?} in {doc}");
    (code(&out), doc)
}

fn names(doc: &Value) -> Vec<String> {
    doc["matchingNames"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_owned())
        .collect()
}

#[test]
fn run_e4_responsive() {
    let (c, doc) = json(&["run", "--instance", &fixture("e4.json"), "--rule", "responsive"]);
    assert_eq!(c, 0);
    assert_eq!(doc["status"], "pass");
    assert_eq!(names(&doc), ["a-j", "b-i"]);
}

#[test]
fn run_e3_guaranteed_enrollment_with_trace() {
    let (c, doc) = json(&[
        "run",
        "--instance",
        &fixture("e3.json"),
        "--rule",
        "guaranteed-enrollment",
        "--trace",
    ]);
    assert_eq!(c, 0);
    assert_eq!(names(&doc), ["b-i", "c-i"]);
    assert!(!doc["trace"].as_array().unwrap().is_empty());

    let text = matchforge(&["run", "--instance", &fixture("e3.json"), "--rule", "guaranteed-enrollment", "--trace"]);
    let text = String::from_utf8(text.stdout).unwrap();
    assert!(text.contains("step 1"), "{text}");
    assert!(text.contains("matching: {b-i, c-i}"), "{text}");
}

#[test]
fn run_per_institution_rules() {
    let (c, doc) = json(&["run", "--instance", &fixture("e4.json"), "--rule", "matroid,j=responsive"]);
    assert_eq!(c, 0);
    assert_eq!(names(&doc), ["a-j", "b-i"]);
}

#[test]
fn run_empty_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, r#"{"contracts": [], "preferences": {}, "institutions": {}}"#).unwrap();
    let (c, doc) = json(&["run", "--instance", path.to_str().unwrap()]);
    assert_eq!(c, 0);
    assert_eq!(doc["matching"], serde_json::json!([]));
}

#[test]
fn check_choice_path_independence_of_guaranteed_enrollment() {
    let (c, doc) = json(&[
        "check",
        "choice",
        "--axiom",
        "path-independence",
        "--rule",
        "guaranteed-enrollment",
        "--instance",
        &fixture("e3.json"),
    ]);
    assert_eq!(c, 0);
    assert_eq!(doc["checks"][0]["name"], "path-independence");
    assert_eq!(doc["checks"][0]["scope"], "i");
}

#[test]
fn check_choice_table_witnesses() {
    let (c, doc) = json(&["check", "choice", "--axiom", "path-independence", "--table", &fixture("pi_counterexample.json")]);
    assert_eq!(c, 4);
    assert_eq!(doc["status"], "witness");
    let w = &doc["checks"][0]["witness"];
    assert_eq!(w["left"], serde_json::json!([0]));
    assert_eq!(w["right"], serde_json::json!([1]));

    let (c, doc) = json(&["check", "choice", "--axiom", "size-monotonicity", "--table", &fixture("sm_counterexample.json")]);
    assert_eq!(c, 4);
    assert_eq!(doc["checks"][0]["witness"]["superset"], serde_json::json!([0, 1]));
}

#[test]
fn check_rule_strategy_proofness_on_shape() {
    let (c, doc) = json(&["check", "rule", "--axiom", "strategy-proofness", "--rule", "responsive", "--shape", "2x2"]);
    assert_eq!(c, 0);
    assert_eq!(doc["checks"][0]["name"], "strategy-proofness");
}

#[test]
fn check_rule_extended_axioms() {
    let (c, doc) = json(&[
        "check",
        "rule",
        "--axiom",
        "individual-rationality,chile,strategy-proofness",
        "--rule",
        "guaranteed-enrollment",
        "--instance",
        &fixture("e3.json"),
    ]);
    assert_eq!(c, 0, "{doc}");
    assert_eq!(doc["checks"].as_array().unwrap().len(), 6);
}

#[test]
fn check_matching_stability() {
    let e4 = fixture("e4.json");
    let (c, _) = json(&["check", "matching", "--instance", &e4, "--matching", "1,2"]);
    assert_eq!(c, 0);
    let (c, doc) = json(&["check", "matching", "--instance", &e4, "--matching", "0,3", "--axiom", "stability"]);
    assert_eq!(c, 4);
    assert_eq!(doc["checks"][0]["witness"]["clause"], "blocking");
    let (c, _) = json(&["check", "matching", "--instance", &e4, "--matching", "0,1"]);
    assert_eq!(c, 2, "two contracts for one agent is not a matching");
}

#[test]
fn verify_commands_pass() {
    let (c, doc) = json(&[
        "verify",
        "characterization",
        "--axioms",
        "chile",
        "--target",
        "guaranteed-enrollment",
        "--instance",
        &fixture("e3.json"),
    ]);
    assert_eq!(c, 0);
    assert_eq!(doc["checks"][0]["outcome"], "characterized");

    let (c, _) = json(&["verify", "lemma-chain", "--rule", "matroid", "--shape", "2x2"]);
    assert_eq!(c, 0);
    let (c, _) = json(&["verify", "forward", "--rule", "responsive", "--instance", &fixture("e4.json")]);
    assert_eq!(c, 0);

    let (c, doc) = json(&["verify", "appendix-h"]);
    assert_eq!(c, 0);
    assert_eq!(doc["checks"].as_array().unwrap().len(), 5);
    assert_eq!(doc["command"], "verify strengthening-counterexample");
}

#[test]
fn verify_characterization_not_unique() {
    let (c, doc) = json(&[
        "verify",
        "characterization",
        "--axioms",
        "non-wastefulness",
        "--target",
        "responsive",
        "--instance",
        &fixture("e3.json"),
    ]);
    assert_eq!(c, 4);
    assert_eq!(doc["checks"][0]["outcome"], "not-unique");
}

#[test]
fn text_reports_cite_axiom_titles() {
    let out = matchforge(&[
        "check",
        "choice",
        "--axiom",
        "chile",
        "--rule",
        "guaranteed-enrollment",
        "--instance",
        &fixture("e3.json"),
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS maximal-utilization (maximal utilization of reservations) at i"), "{text}");
}

#[test]
fn gen_is_deterministic_and_loadable() {
    let args = ["gen", "--agents", "3", "--institutions", "2", "--types", "2", "--seed", "7"];
    let a = matchforge(&args);
    let b = matchforge(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen.json");
    let mut with_output = args.to_vec();
    with_output.extend(["--output", path.to_str().unwrap()]);
    assert_eq!(code(&matchforge(&with_output)), 0);
    assert_eq!(std::fs::read(&path).unwrap(), a.stdout);
    let (c, _) = json(&["run", "--instance", path.to_str().unwrap()]);
    assert_eq!(c, 0);

    let too_big = matchforge(&["gen", "--agents", "9", "--institutions", "8"]);
    assert_eq!(code(&too_big), 2);
}

#[test]
fn instance_and_usage_errors_exit_2() {
    let (c, doc) = json(&["run", "--instance", "/nonexistent/instance.json"]);
    assert_eq!(c, 2);
    assert_eq!(doc["error"]["kind"], "instance");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"contracts": [], "preferences": {}, "institutions": {}, "extra": 1}"#).unwrap();
    assert_eq!(json(&["run", "--instance", path.to_str().unwrap()]).0, 2);

    assert_eq!(json(&["check", "choice", "--axiom", "bogus", "--instance", &fixture("e3.json")]).0, 2);
    assert_eq!(json(&["run", "--instance", &fixture("e3.json"), "--rule", "bogus"]).0, 2);
    // Reserve axioms need declared reserves.
    assert_eq!(
        json(&["verify", "characterization", "--axioms", "chile", "--target", "guaranteed-enrollment", "--instance", &fixture("e4.json")]).0,
        2
    );
    assert_eq!(code(&matchforge(&["run"])), 2);
    assert_eq!(code(&matchforge(&["--max-ground", "0", "verify", "strengthening-counterexample"])), 2);

    let out = Command::new(env!("CARGO_BIN_EXE_matchforge"))
        .args(["verify", "strengthening-counterexample"])
        .env("MATCHFORGE_MAX_GROUND", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn guard_violations_exit_3() {
    let (c, doc) = json(&["--max-profiles", "10", "check", "rule", "--shape", "3x3"]);
    assert_eq!(c, 3);
    assert_eq!(doc["error"]["kind"], "guard");

    let (c, _) = json(&[
        "--max-ground",
        "2",
        "check",
        "choice",
        "--axiom",
        "path-independence",
        "--instance",
        &fixture("e3.json"),
    ]);
    assert_eq!(c, 3);

    let out = Command::new(env!("CARGO_BIN_EXE_matchforge"))
        .args(["check", "choice", "--axiom", "substitutability", "--instance", &fixture("e3.json")])
        .env("MATCHFORGE_MAX_GROUND", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
}
