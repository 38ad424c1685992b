use std::path::PathBuf;

use protocheck::scenario_file::load_scenario;
use protocheck::scenarios::three_prisoners;
use protocheck::update::{Gap, Posterior};
use protocheck::{Rational, ScenarioFile};
use protocheck_cli::{
    run_args, AuditReport, CheckCarReport, ConstructReport, FixedPointReport, Outcome, SimulateReport, UpdateReport,
};

fn cli(args: &[&str]) -> Outcome {
    run_args(std::iter::once("protocheck").chain(args.iter().copied()))
}

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("protocheck-cli-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn audit_three_prisoners() {
    let out = cli(&["audit", "--scenario", "three-prisoners", "--param", "q=1/2", "--format", "json"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let report: AuditReport = serde_json::from_str(&out.stdout).unwrap();
    assert!(report.accurate);
    assert_eq!(report.observations.len(), 2);
    for e in &report.observations {
        assert!(!e.comparison.agree);
        assert!(!e.car.holds);
        assert_eq!(e.comparison.tv_gap, Gap::Exact(Rational::new(1, 6)));
    }
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", out.stdout);
    let text = cli(&["audit", "--scenario", "three-prisoners"]);
    assert!(text.stdout.contains("tv_gap: 1/6"), "{}", text.stdout);
    assert!(text.stdout.contains("w_a=1/3"));
}

#[test]
fn judy_benjamin_update() {
    let out = cli(&["update", "--rule", "mre", "--scenario", "judy-benjamin", "--param", "alpha=3", "--format", "json"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let report: UpdateReport = serde_json::from_str(&out.stdout).unwrap();
    let Posterior::Approx(d) = &report.posterior else { panic!("expected a float posterior") };
    assert!(d.mass(0) + d.mass(1) > 0.5);
    assert_eq!(report.posterior_f64, d.clone());
}

#[test]
fn naive_rule_on_jeffrey_observation_is_usage_error() {
    let file = temp_file(
        "jeffrey.json",
        r#"{"worlds": ["a", "b", "c"], "prior": {"a": "1/3", "b": "1/3", "c": "1/3"},
            "observations": [{"name": "j", "kind": "jeffrey", "sets": [["a"], ["b", "c"]], "alphas": ["1/2", "1/2"]}]}"#,
    );
    let out = cli(&["update", "--rule", "naive", "--file", file.to_str().unwrap()]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("cannot be applied"), "{}", out.stderr);
    let ok = cli(&["update", "--file", file.to_str().unwrap()]);
    assert_eq!(ok.code, 0);
    assert!(ok.stdout.contains("a=1/2"), "{}", ok.stdout);
}

#[test]
fn bundled_file_matches_builder() {
    let s = load_scenario(&bundled("three_prisoners.json")).unwrap();
    assert_eq!(s.protocol.unwrap(), three_prisoners(&Rational::new(1, 2)).unwrap());
    let printed = cli(&["scenario", "--scenario", "three-prisoners"]);
    assert_eq!(printed.code, 0);
    let file: ScenarioFile = serde_json::from_str(&printed.stdout).unwrap();
    assert_eq!(file.validate().unwrap().protocol.unwrap(), three_prisoners(&Rational::new(1, 2)).unwrap());
}

#[test]
fn bad_input_exit_codes() {
    assert_eq!(cli(&["audit", "--scenario", "three-prisoners", "--param", "q=1/0"]).code, 1);
    assert_eq!(cli(&["audit", "--scenario", "three-prisoners", "--param", "q=3/2"]).code, 1);
    assert_eq!(cli(&["audit", "--scenario", "newcomb"]).code, 1);
    assert_eq!(cli(&["audit"]).code, 1);
    assert_eq!(cli(&["frobnicate"]).code, 1);
    let unnormalized = temp_file(
        "unnormalized.json",
        r#"{"worlds": ["a", "b"], "prior": {"a": "1/2", "b": "1/3"}, "observations": [{"kind": "event", "set": ["a"]}]}"#,
    );
    let out = cli(&["update", "--file", unnormalized.to_str().unwrap()]);
    assert_eq!(out.code, 1);
    let missing = cli(&["audit", "--file", "/nonexistent/scenario.json"]);
    assert_eq!(missing.code, 1);
    assert_eq!(cli(&["audit", "--scenario", "judy-benjamin"]).code, 1);
    assert_eq!(cli(&["--help"]).code, 0);
}

#[test]
fn zero_probability_event_is_math_error() {
    let file = temp_file(
        "zero.json",
        r#"{"worlds": ["a", "b"], "prior": {"a": "1", "b": "0"}, "observations": [{"name": "b", "kind": "event", "set": ["b"]}]}"#,
    );
    let out = cli(&["update", "--file", file.to_str().unwrap()]);
    assert_eq!(out.code, 2, "{}", out.stderr);
}

#[test]
fn check_car_at_q_one() {
    let out = cli(&["check-car", "--scenario", "three-prisoners", "--param", "q=1", "--format", "json"]);
    let report: CheckCarReport = serde_json::from_str(&out.stdout).unwrap();
    let verdicts: Vec<(String, bool)> = report.reports.iter().map(|r| (r.observation_name.clone(), r.holds)).collect();
    assert_eq!(verdicts, vec![("says-b".to_string(), true), ("says-c".to_string(), false)]);
    assert_eq!(report.guaranteed_for_all_priors, Some(false));
}

#[test]
fn construct_then_fixed_point() {
    let spec = temp_file(
        "construct.json",
        r#"{"worlds": ["a", "b", "c"], "cells": [["a", "b"], ["c"]], "pr_o": ["1/3", "2/3"],
            "alphas": [["1/4", "3/4"], ["1/2", "1/2"]], "conditionals": [{"a": "1/3", "b": "2/3"}, {"c": "1"}]}"#,
    );
    let out = cli(&["construct", "--file", spec.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let report: ConstructReport = serde_json::from_str(&out.stdout).unwrap();
    assert!(report.car.iter().all(|c| c.holds));
    let file = temp_file("constructed.json", &report.scenario.to_json());
    let fp = cli(&["fixed-point", "--file", file.to_str().unwrap(), "--format", "json", "--restarts", "10"]);
    assert_eq!(fp.code, 0, "{}", fp.stderr);
    let fp: FixedPointReport = serde_json::from_str(&fp.stdout).unwrap();
    assert!(fp.result.compatible);
}

#[test]
fn json_output_is_deterministic_and_round_trips() {
    let args = ["simulate", "--scenario", "monty-hall", "--seed", "7", "--samples", "20000", "--format", "json"];
    let a = cli(&args);
    let b = cli(&args);
    assert_eq!(a, b);
    let report: SimulateReport = serde_json::from_str(&a.stdout).unwrap();
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", a.stdout);
    assert!(report.max_deviation < 0.02);
    let other = cli(&["simulate", "--scenario", "monty-hall", "--seed", "8", "--samples", "20000", "--format", "json"]);
    assert_ne!(a.stdout, other.stdout);
    let fp_args = ["fixed-point", "--scenario", "monty-hall", "--restarts", "3", "--format", "json"];
    assert_eq!(cli(&fp_args), cli(&fp_args));
}
