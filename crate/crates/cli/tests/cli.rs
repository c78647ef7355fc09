use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn crossover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossover"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> (Value, i32) {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let out = crossover(&all);
    let v = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout));
    });
    (v, out.status.code().unwrap())
}

fn write_examples(dir: &Path) {
    let out = crossover(&["examples", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn examples_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    write_examples(dir.path());
    for name in ["ex1.design", "ex2.design", "ex5.design", "ex7.design"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let (v, code) = json(&["verify", dir.path().join("ex1.design").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["command"], "verify");
    assert_eq!(v["results"]["certificate"]["verdict"]["verdict"], "A+MV-optimal-in-Lambda");
    assert_eq!(v["results"]["certificate"]["totally_balanced"], true);
}

#[test]
fn examples_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    write_examples(dir.path());
    let out = crossover(&["examples", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = crossover(&["examples", "--out", dir.path().to_str().unwrap(), "--force"]);
    assert!(out.status.success());
}

#[test]
fn optimize_r0_five_periods() {
    let (v, code) = json(&["optimize-r0", "--t", "5", "--p", "5", "--n", "50"]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["best_r0"], 60);
    let b = v["results"]["min_bound"].as_f64().unwrap();
    assert!((b - 0.24179).abs() < 1e-4, "{b}");
}

#[test]
fn bound_at_one_r0() {
    let (v, code) = json(&["bound", "--t", "6", "--p", "5", "--n", "30", "--r0", "30"]);
    assert_eq!(code, 0);
    assert!((v["results"]["bound"].as_f64().unwrap() - 0.55044).abs() < 1e-4);
    let (_, code) = json(&["bound", "--t", "6", "--p", "5", "--n", "30", "--r0", "31"]);
    assert_eq!(code, 1);
}

#[test]
fn eval_example_seven() {
    let dir = tempfile::tempdir().unwrap();
    write_examples(dir.path());
    let file = dir.path().join("ex7.design");
    let (v, code) = json(&["eval", file.to_str().unwrap()]);
    assert_eq!(code, 0);
    let e = &v["results"]["efficiency"];
    assert!((e["e_c"].as_f64().unwrap() - 0.993).abs() < 1e-3);
    assert!((e["e_1"].as_f64().unwrap() - e["e_2"].as_f64().unwrap()).abs() <= 1e-9);
    let a = v["results"]["criteria"]["carryover"]["a_criterion"].as_f64().unwrap();
    assert!((a - 0.55419).abs() < 1e-4);

    let text = crossover(&["eval", file.to_str().unwrap(), "--model", "two-way"]);
    let s = String::from_utf8(text.stdout).unwrap();
    assert!(s.contains("e_c 99.32%"), "{s}");
    assert!(s.contains("two-way") && !s.contains("zero-way"));
}

#[test]
fn json_numbers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_examples(dir.path());
    let (v, _) = json(&["eval", dir.path().join("ex5.design").to_str().unwrap()]);
    let a = v["results"]["criteria"]["carryover"]["a_criterion"].as_f64().unwrap();
    let d = crossover::Design::parse(&std::fs::read_to_string(dir.path().join("ex5.design")).unwrap()).unwrap();
    assert_eq!(a, crossover::a_criterion(&d, crossover::ModelKind::Carryover).unwrap());
    let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(again, v);
}

#[test]
fn construct_is_deterministic() {
    let args = ["construct", "--t", "5", "--p", "3", "--n", "30", "--seed", "11"];
    let (a, code) = json(&args);
    assert_eq!(code, 0);
    let (b, _) = json(&args);
    assert_eq!(a["results"]["design_text"], b["results"]["design_text"]);
    assert_eq!(a["seed"], 11);
    assert_eq!(a["results"]["certificate"]["verdict"]["verdict"], "A+MV-optimal-in-Lambda");
    let text = a["results"]["design_text"].as_str().unwrap();
    let d = crossover::Design::parse(text).unwrap();
    assert_eq!((d.t(), d.p(), d.n()), (5, 3, 30));
}

#[test]
fn construct_infeasible_exits_one() {
    let (v, code) = json(&["construct", "--t", "3", "--p", "3", "--n", "10"]);
    assert_eq!(code, 1);
    assert!(v["error"].as_str().unwrap().contains("infeasible"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(crossover(&["verify", "--bogus"]).status.code(), Some(2));
    assert_eq!(crossover(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(crossover(&["verify", "/nonexistent/design"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.design");
    std::fs::write(&bad, "3 3 2\n0 1\n1 2\n").unwrap();
    assert_eq!(crossover(&["verify", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn not_certified_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("adjacent.design");
    std::fs::write(&f, "2 3 2\n0 1\n0 2\n1 2\n").unwrap();
    let (v, code) = json(&["verify", f.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(v["results"]["certificate"]["verdict"]["verdict"], "not-certified");
}

#[test]
fn table1_lists_every_row() {
    let (v, code) = json(&["table1"]);
    assert_eq!(code, 0);
    let rows = v["results"].as_array().unwrap();
    assert_eq!(rows.len(), 15);
    for r in rows {
        let row = r["reference"]["row"].as_u64().unwrap();
        if [1, 2, 6, 7, 10].contains(&row) {
            let deltas = r["deltas"].as_array().unwrap();
            assert!(deltas.iter().all(|d| d.as_f64().unwrap().abs() < 0.5), "row {row}");
        }
    }
}
