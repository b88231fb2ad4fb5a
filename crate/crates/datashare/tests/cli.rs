use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn datashare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_datashare"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn last_line_json(o: &Output) -> Value {
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_and_brute_agree_on_fixtures() {
    for (file, want) in [("instance.json", 0), ("instance_infeasible.json", 1)] {
        let f = fixture(file);
        let a = datashare(&["mech", "solve", path(&f), "--json"]);
        let b = datashare(&["mech", "brute", path(&f), "--json"]);
        assert_eq!(code(&a), want, "{}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(code(&b), want);
        let (a, b) = (json(&a), json(&b));
        assert_eq!(a["feasible"], b["feasible"]);
        if want == 0 {
            assert_eq!(a["equilibrium"], Value::Bool(true));
            let mut pi: Vec<u64> = a["pi"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
            pi.sort();
            assert_eq!(pi, vec![0, 1, 2]);
        }
    }
}

#[test]
fn solve_output_roundtrips_as_outcome() {
    let f = fixture("instance.json");
    let o = datashare(&["mech", "solve", path(&f)]);
    let v = json(&o);
    let delta = v["delta"].as_array().unwrap();
    let last = v["pi"].as_array().unwrap().last().unwrap().as_u64().unwrap() as usize;
    assert!((delta[last].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn fas_threshold_exit_codes() {
    let g = fixture("graph.json");
    let yes = datashare(&["mech", "fas", path(&g), "--gamma", "0.3", "--json"]);
    let no = datashare(&["mech", "fas", path(&g), "--gamma", "0.2", "--json"]);
    assert_eq!(code(&yes), 0);
    assert_eq!(code(&no), 1);
    assert_eq!(json(&yes)["min_fas_weight"], serde_json::json!(0.25));
    let nsq = datashare(&["mech", "nsq", path(&fixture("instance_nsq.json"))]);
    assert_eq!(code(&nsq), 0);
}

#[test]
fn malformed_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"n\": 2,\n  \"alpha\": [0.1,\n}").unwrap();
    let o = datashare(&["mech", "solve", path(&bad)]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 4") && err.contains("column"), "{err}");

    let missing = datashare(&["mech", "solve", "/nonexistent/instance.json"]);
    assert_ne!(code(&missing), 0);
    assert_eq!(code(&datashare(&["mech", "solve", "--bogus"])), 2);
    assert_eq!(code(&datashare(&["scenario", "no_such_thing"])), 2);
}

#[test]
fn ordered_run_is_deterministic() {
    let spec = fixture("spec.json");
    let inputs = fixture("inputs.json");
    let args = [
        "mpc", "ordered", "--spec", path(&spec), "--inputs", path(&inputs), "--corrupt", "1",
        "--abort-phase", "2", "--seed", "9", "--json",
    ];
    let a = datashare(&args);
    let b = datashare(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let v = last_line_json(&a);
    assert_eq!(v["prefix_fair"], Value::Bool(true));
    assert_eq!(v["ordered_delivery"], Value::Bool(true));
}

#[test]
fn transcript_file_holds_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.jsonl");
    let o = datashare(&[
        "mpc", "dummy", "--spec", path(&fixture("spec.json")), "--inputs",
        path(&fixture("inputs.json")), "--G", "2", "--transcript", path(&t), "--json",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["gaps_ok"], Value::Bool(true));
    let text = std::fs::read_to_string(&t).unwrap();
    let kinds: Vec<String> = text
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["kind"].as_str().unwrap().to_string())
        .collect();
    assert!(kinds.iter().filter(|k| *k == "out").count() == 4);
    assert!(kinds.iter().any(|k| k == "clk"));
}

#[test]
fn timelock_flags_fast_solvers() {
    let spec = fixture("spec.json");
    let dir = tempfile::tempdir().unwrap();
    let two = dir.path().join("two.json");
    std::fs::write(&two, r#"["0101", "0202"]"#).unwrap();
    let run = |speeds: &str| {
        datashare(&[
            "mpc", "timelock", "--spec", path(&spec), "--inputs", path(&two), "--B", "2", "--G", "3",
            "--speeds", speeds, "--transcript", path(&dir.path().join("t.jsonl")), "--json",
        ])
    };
    let ok = run("1,2");
    assert_eq!(code(&ok), 0);
    // Party 0 is served second; at 8x speed it opens as early as party 1.
    let bad = run("8,1");
    assert_eq!(code(&bad), 1);
    let v = json(&bad);
    assert_eq!(v["compliant"], Value::Bool(false));
    assert_eq!(v["order_ok"], Value::Bool(false));
}

#[test]
fn puzzle_lock_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("p.json");
    let o = datashare(&[
        "puzzle", "lock", "--data", "c0ffee", "--t", "40", "--scheme", "hash", "--out", path(&f),
    ]);
    assert_eq!(code(&o), 0);
    let s = datashare(&["puzzle", "solve", path(&f), "--json"]);
    assert_eq!(code(&s), 0);
    let v = json(&s);
    assert_eq!(v["items"], serde_json::json!(["c0ffee"]));
    assert_eq!(v["steps"], serde_json::json!(40));

    let line = dir.path().join("line.json");
    let o = datashare(&[
        "puzzle", "line", "--items", path(&fixture("items.json")), "--delays", "1,7,49",
        "--scheme", "square", "--kappa", "64", "--out", path(&line),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&datashare(&["puzzle", "solve", path(&line), "--json"]));
    assert_eq!(v["steps"], serde_json::json!(49));
}

#[test]
fn scenarios_report_verdicts() {
    let x = datashare(&["scenario", "xor_secret", "--json"]);
    assert_eq!(code(&x), 0);
    let v = json(&x);
    let mut delta: Vec<f64> = v["outcome"]["delta"].as_array().unwrap().iter().map(|d| d.as_f64().unwrap()).collect();
    delta.sort_by(f64::total_cmp);
    for (d, want) in delta.iter().zip([1.0, 2.0, 3.0, 4.0]) {
        assert!((d - want).abs() < 1e-9, "{delta:?}");
    }
    let g = datashare(&["scenario", "gaussian_mean", "--json"]);
    assert_eq!(code(&g), 1);
    assert_eq!(json(&g)["outcome"]["feasible"], Value::Bool(false));
    for name in ["path_flow_diamond", "gene_loci"] {
        assert_eq!(code(&datashare(&["scenario", name])), 0, "{name}");
    }
}
