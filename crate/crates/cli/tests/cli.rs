use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn meanred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meanred"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn scalar(args: &[&str], field: &str) -> f64 {
    let out = meanred(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    json_of(&out)[field].as_f64().unwrap()
}

fn scratch(name: &str, body: &str) -> PathBuf {
    let p = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn mean_examples() {
    let cases: [(&[&str], f64); 3] = [
        (&["mean", "--kind", "holder", "--p", "2", "--x", "1,7"], 5.0),
        (&["mean", "--kind", "arithmetic", "--x", "4,4,4"], 4.0),
        (&["mean", "--kind", "gini", "--p", "2", "--q", "1", "--x", "1,3"], 2.5),
    ];
    for (args, want) in cases {
        let got = scalar(args, "value");
        assert!((got - want).abs() < 1e-9, "{args:?}: {got}");
    }
}

#[test]
fn reduce_examples() {
    let cases: [(&[&str], f64); 3] = [
        (&["reduce", "--kind", "arithmetic", "--arity", "3", "--chi", "1,2", "--x", "1,5"], 3.0),
        (
            &["reduce", "--kind", "quasi-arithmetic", "--f", "log", "--arity", "3", "--chi", "1,2", "--x", "2,8"],
            4.0,
        ),
        (&["reduce", "--kind", "arithmetic", "--arity", "3", "--chi", "1,2,3", "--x", "1,2,3"], 2.0),
    ];
    for (args, want) in cases {
        let got = scalar(args, "reduced_value");
        assert!((got - want).abs() < 1e-8, "{args:?}: {got}");
    }
}

#[test]
fn reduce_reports_diagnostics() {
    let v = json_of(&meanred(&[
        "reduce", "--kind", "holder", "--p", "3", "--arity", "4", "--chi", "2,4", "--x", "1,6",
    ]));
    assert_eq!(v["unique_flag"], "unique");
    assert_eq!(v["converged"], true);
    assert!(v["fixed_point_residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn descriptor_json_and_file() {
    let inline = scalar(
        &["mean", "--descriptor", r#"{"kind":"holder","p":2,"arity":2}"#, "--x", "1,7"],
        "value",
    );
    assert!((inline - 5.0).abs() < 1e-12);
    let path = scratch("geo.json", r#"{"kind":"quasi-arithmetic","f":"log","arity":2}"#);
    let from_file = scalar(
        &["mean", "--descriptor", &format!("@{}", path.display()), "--x", "2,8"],
        "value",
    );
    assert!((from_file - 4.0).abs() < 1e-9);
}

#[test]
fn vector_mean_csv_columns() {
    let out = meanred(&[
        "--format", "csv", "mean", "--kind", "norm-squared-potential", "--w", "1", "--w", "2",
        "--x", "0,0;3,3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("v1,v2,residual"));
    let row: Vec<f64> = lines.next().unwrap().split(',').take(2).map(|t| t.parse().unwrap()).collect();
    assert!(row.iter().all(|c| (c - 2.0).abs() < 1e-8), "{row:?}");
}

#[test]
fn invalid_input_exits_2() {
    for args in [
        &["mean", "--kind", "holder", "--x", "1,2"][..],
        &["mean", "--kind", "nonsense", "--x", "1,2"],
        &["mean", "--kind", "arithmetic", "--x", "1,abc"],
        &["mean", "--kind", "quasi-arithmetic", "--f", "log", "--x", "-1,2"],
        &["reduce", "--kind", "arithmetic", "--arity", "3", "--chi", "1,1", "--x", "1,2"],
        &["reduce", "--kind", "arithmetic", "--chi", "1", "--x", "1"],
        &["mean", "--kind", "deviation-custom", "--e", "u - ", "--x", "1,2"],
        &["verify", "no-such-suite"],
        &["--trials", "0", "verify", "jensen"],
    ] {
        let out = meanred(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?} wrote to stdout");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn verify_builtins_pass() {
    for name in ["jensen", "thm-rgd"] {
        let out = meanred(&["--trials", "40", "verify", name]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        let v = json_of(&out);
        assert_eq!(v["suite"], name);
        assert_eq!(v["summary"]["failed"], 0);
        assert_eq!(v["hypotheses"], "sampled");
    }
}

const REVERSED: &str = r#"{
  "version": 1,
  "name": "reversed",
  "cases": [
    {"name": "power means 2 <= 1", "type": "compare",
     "g": {"kind": "holder", "p": 2, "arity": 3},
     "e": {"kind": "holder", "p": 1, "arity": 3},
     "chi": [1, 2], "expect": "fail"},
    {"name": "power means 1 <= 2", "type": "compare",
     "g": {"kind": "holder", "p": 1, "arity": 3},
     "e": {"kind": "holder", "p": 2, "arity": 3},
     "chi": [1, 2], "expect": "pass"}
  ]
}"#;

#[test]
fn reversed_comparison_is_an_expected_failure() {
    let path = scratch("reversed.json", REVERSED);
    let out = meanred(&["--trials", "50", "verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    let case = &v["cases"][0];
    assert_eq!(case["ok"], true);
    assert_eq!(case["full"]["found"], true);
    assert!(case["full"]["witness"].is_array());
    assert_eq!(v["cases"][1]["full"]["found"], false);
}

#[test]
fn unmet_expectation_exits_1() {
    let flipped = REVERSED.replace(r#""fail""#, r#""tmp""#).replace(r#""pass""#, r#""fail""#).replace(r#""tmp""#, r#""pass""#);
    let path = scratch("flipped.json", &flipped);
    let out = meanred(&["--trials", "50", "verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_of(&out)["summary"]["failed"], 2);
}

#[test]
fn malformed_suite_exits_2() {
    for (name, body) in [
        ("broken.json", "{\"version\": 1, \"name\": "),
        ("badversion.json", r#"{"version": 9, "name": "x", "cases": []}"#),
        ("badfield.json", r#"{"version": 1, "name": "x", "cases": [], "colour": 1}"#),
    ] {
        let path = scratch(name, body);
        let out = meanred(&["verify", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{name}");
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn verify_is_deterministic_and_seeded() {
    let run = |seed: &str| meanred(&["--seed", seed, "--trials", "30", "verify", "comparisons"]).stdout;
    let a = run("7");
    assert!(!a.is_empty());
    assert_eq!(a, run("7"));
    assert_ne!(a, run("8"));
}

#[test]
fn verify_csv_has_a_row_per_case() {
    let out = meanred(&["--format", "csv", "--trials", "30", "verify", "counterexamples"]);
    assert_eq!(out.status.code(), Some(0));
    let mut rdr = csv::Reader::from_reader(&out.stdout[..]);
    let headers = rdr.headers().unwrap().clone();
    let found = headers.iter().position(|h| h == "found").unwrap();
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| &r[found] == "true"));
}

#[test]
fn output_flag_writes_file() {
    let path = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("mean-out.json");
    let _ = std::fs::remove_file(&path);
    let out = meanred(&[
        "--output", path.to_str().unwrap(), "mean", "--kind", "holder", "--p", "2", "--x", "1,7",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["value"], 5.0);
}

#[test]
fn fuzz_aggregates_suites() {
    let out = meanred(&["--trials", "20", "fuzz", "jensen", "counterexamples"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert_eq!(v["summary"]["suites"], 2);
    assert_eq!(v["reports"].as_array().unwrap().len(), 2);
    assert_eq!(v["summary"]["implication_violations"], 0);
}
