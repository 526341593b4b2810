use std::process::{Command, Output};

use serde_json::Value;

fn mtasep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtasep"))
        .args(args)
        .output()
        .expect("run mtasep")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn exact_three_sites_two_classes() {
    let out = mtasep(&["exact", "--sites", "3", "--classes", "2", "--counts", "1,1", "--check-balance"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    assert_eq!(doc["M"], "9");
    assert_eq!(doc["balance"], true);
    let total: u64 = doc["states"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["weight"].as_str().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 9);
}

#[test]
fn exact_rejects_counts_that_do_not_fit() {
    let out = mtasep(&["exact", "--sites", "3", "--classes", "2", "--counts", "4,1"]);
    assert_eq!(code(&out), 65);
    assert!(out.stdout.is_empty());
}

#[test]
fn exact_rejects_mismatched_class_count() {
    let out = mtasep(&["exact", "--sites", "3", "--classes", "3", "--counts", "1,1"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn exact_lists_cyclic_shifts_as_minimal() {
    let out = mtasep(&["exact", "--sites", "4", "--classes", "4", "--counts", "1,1,1,1", "--list-minimal"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    assert_eq!(doc["M"], "96");
    let minimal: Vec<Vec<u64>> = serde_json::from_value(doc["minimal"].clone()).unwrap();
    assert_eq!(minimal.len(), 4);
    assert!(minimal.contains(&vec![4, 3, 2, 1]));
    assert!(minimal.contains(&vec![1, 4, 3, 2]));
}

#[test]
fn exact_csv_has_one_row_per_state() {
    let out = mtasep(&["exact", "--sites", "3", "--classes", "2", "--counts", "1,1", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("s0,s1,s2,weight"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn ring_samples_are_reproducible() {
    let args = ["sample", "ring", "--sites", "6", "--classes", "2", "--counts", "2,1", "--samples", "20", "--seed", "7"];
    let a = mtasep(&args);
    let b = mtasep(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8(a.stdout).unwrap().lines().count(), 20);
}

#[test]
fn line_sample_covers_the_window() {
    let out = mtasep(&["sample", "line", "--rates", "0.2,0.3", "--window", "100", "--burnin", "500", "--seed", "1"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    assert_eq!(doc["lo"], -100);
    assert_eq!(doc["sites"].as_array().unwrap().len(), 201);
}

#[test]
fn simulation_trace_is_json_lines() {
    let out = mtasep(&[
        "simulate", "tasep", "--sites", "5", "--classes", "2", "--counts", "1,2", "--events", "50", "--seed", "3",
        "--record-every", "10",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.iter().filter(|v| v.get("site").is_some()).count(), 50);
    assert_eq!(lines.iter().filter(|v| v.get("snapshot").is_some()).count(), 5);
}

#[test]
fn simulation_requires_a_horizon() {
    let out = mtasep(&["simulate", "multiline", "--sites", "4", "--lines", "1,2", "--seed", "1"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn verify_suites_pass() {
    for suite in ["bijection", "balance", "minimal", "commutation", "queues"] {
        let out = mtasep(&["verify", suite, "--sites", "4", "--lines", "2", "--exhaustive"]);
        assert_eq!(code(&out), 0, "{suite}");
        assert_eq!(json(&out)["pass"], true);
        let out = mtasep(&["verify", suite, "--sites", "7", "--lines", "3", "--trials", "30", "--seed", "5"]);
        assert_eq!(code(&out), 0, "{suite}");
    }
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = mtasep(&["verify", "everything", "--sites", "4", "--lines", "2", "--exhaustive"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn burke_passes() {
    let out = mtasep(&["stats", "burke", "--arrival", "0.2", "--service", "0.3", "--steps", "200000", "--seed", "11"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["outcome"], "pass");
}

#[test]
fn coupling_passes() {
    let out = mtasep(&[
        "stats", "coupling", "--rates", "0.2,0.3", "--window", "100", "--paths", "1000", "--seed", "12",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["values"]["queue_violations"], 0.0);
}

#[test]
fn renewal_string_passes() {
    let out = mtasep(&["stats", "renewal", "--rates", "0.2,0.2,0.2", "--string", "3,2", "--window", "20000", "--seed", "13"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn control_string_is_inconclusive() {
    let out = mtasep(&[
        "stats", "factorization", "--rates", "0.2,0.2,0.2", "--string", "1,2", "--left", "1", "--right", "1",
        "--samples", "300", "--seed", "14",
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn bad_rates_are_usage_errors() {
    let out = mtasep(&["stats", "qlen", "--rates", "0.6,0.6", "--seed", "1"]);
    assert_eq!(code(&out), 64);
    let out = mtasep(&["stats", "qlen", "--rates", "0.2", "--seed", "1"]);
    assert_eq!(code(&out), 64);
}

#[test]
fn output_and_occupation_files() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let occ = dir.path().join("occ.json");
    let out = mtasep(&[
        "simulate", "multiline", "--sites", "4", "--lines", "1,2", "--time", "50", "--seed", "2",
        "--output", trace.to_str().unwrap(), "--occupation", occ.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    assert!(std::fs::read_to_string(&trace).unwrap().lines().count() > 10);
    let occ: Value = serde_json::from_str(&std::fs::read_to_string(&occ).unwrap()).unwrap();
    let mass: f64 = occ["states"].as_array().unwrap().iter().map(|s| s["weight"].as_f64().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-9);
    assert!((occ["total_time"].as_f64().unwrap() - 50.0).abs() < 1e-9);
}
