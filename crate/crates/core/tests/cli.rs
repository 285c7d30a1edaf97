//! End-to-end behaviour of the `cfsafe` binary.

mod support;

use std::path::Path;
use std::process::{Command, Output};

use support::*;

const BAD: &str = r#"P=? [ F "bad" ]"#;

fn cfsafe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfsafe"))
        .args(args)
        .env_remove("CF_SAFE_API_KEY")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn check_prints_the_probability() {
    let (m, a) = (example("chain.prism"), example("chain_prefer_a.json"));
    let o = cfsafe(&["check", p(&m), p(&a), BAD]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().next(), Some("0.5"));
}

#[test]
fn check_float_mode_with_value_iteration() {
    let (m, a) = (example("chain.prism"), example("chain_prefer_a.json"));
    let o = cfsafe(&["check", p(&m), p(&a), BAD, "--mode", "float", "--solver", "gauss-seidel"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: f64 = stdout(&o).lines().next().unwrap().parse().unwrap();
    assert!((v - 0.5).abs() <= 1e-12);
}

#[test]
fn check_can_emit_the_induced_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("chain.dtmc");
    let (m, a) = (example("chain.prism"), example("chain_prefer_a.json"));
    let o = cfsafe(&["check", p(&m), p(&a), BAD, "--emit-dtmc", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!std::fs::read_to_string(out).unwrap().is_empty());
}

#[test]
fn extract_lists_the_frontier() {
    let (m, a) = (example("chain.prism"), example("chain_prefer_a.json"));
    let o = cfsafe(&["extract", p(&m), p(&a), BAD]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    assert!(out.contains(r#""one_step_prob": 0.5"#), "{out}");
    assert!(out.contains(r#""action": "a""#), "{out}");

    let b = example("chain_prefer_b.json");
    let o = cfsafe(&["extract", p(&m), p(&b), BAD]);
    assert!(o.status.success());
    assert!(stdout(&o).is_empty());
}

#[test]
fn repair_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let (m, a) = (example("chain.prism"), example("chain_prefer_a.json"));
    let o = cfsafe(&["repair", p(&m), p(&a), BAD, "--advisor", "baseline", "--out-dir", p(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("0.500     0.000"));
    for ext in ["report.txt", "report.json", "advice.jsonl"] {
        assert!(dir.path().join(format!("chain.{ext}")).is_file(), "{ext}");
    }
}

#[test]
fn repair_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(example("chain_fix.json"), dir.path().join("fix.json")).unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"advisor": "scripted", "script": "fix.json", "passes": 2}"#).unwrap();
    let (m, a) = (example("chain.prism"), example("chain_prefer_a.json"));
    let out = dir.path().join("out");
    let o = cfsafe(&["repair", p(&m), p(&a), BAD, "--config", p(&cfg), "--out-dir", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Scripted"));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"advisr": "baseline"}"#).unwrap();
    let (m, a) = (example("chain.prism"), example("chain_prefer_a.json"));
    let o = cfsafe(&["check", p(&m), p(&a), BAD, "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_with_one() {
    let (m, a) = (example("chain.prism"), example("chain_prefer_a.json"));
    let missing = example("no_such_policy.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["check", p(&m), p(&missing), BAD],
        vec!["check", p(&m), p(&a), "P=? [ G \"bad\" ]"],
        vec!["repair", p(&m), p(&a), BAD, "--advisor", "llm-desc"],
        vec!["repair", p(&m), p(&a), BAD, "--advisor", "scripted"],
        vec!["repair", p(&m), p(&a), BAD, "--advisor", "oracle"],
        vec!["bogus"],
    ];
    for args in cases {
        let o = cfsafe(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
}

#[test]
fn model_errors_exit_with_two() {
    let (m, a) = (example("chain.prism"), example("chain_prefer_a.json"));
    let o = cfsafe(&["check", p(&m), p(&a), r#"P=? [ F "nowhere" ]"#]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.prism");
    std::fs::write(&broken, "mdp\nmodule m\n  x : [0..1] init 0;\n  [a] y=0 -> (x'=1);\nendmodule\n").unwrap();
    let o = cfsafe(&["check", p(&broken), p(&a), BAD]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("broken.prism:4:"), "{}", stderr(&o));
}

#[test]
fn missing_api_key_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let (m, a, d) = (example("chain.prism"), example("chain_prefer_a.json"), example("chain_description.txt"));
    let o = cfsafe(&[
        "repair",
        p(&m),
        p(&a),
        BAD,
        "--advisor",
        "llm-desc",
        "--desc",
        p(&d),
        "--endpoint",
        "http://127.0.0.1:9",
        "--model",
        "m",
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("CF_SAFE_API_KEY"));
}

#[test]
fn help_exits_cleanly() {
    assert!(cfsafe(&["--help"]).status.success());
    assert!(cfsafe(&["repair", "--help"]).status.success());
}
