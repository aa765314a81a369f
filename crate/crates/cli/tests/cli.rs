use std::path::Path;
use std::process::Command;

use metriq_cli::run::{run, Output};
use serde_json::Value;
use tempfile::TempDir;

const T2: &str = "theory T2 { axiom { x =[1] y } |- x =[0] y }\nspace A { a b : d(a,b) = 1 }\n";

const STRONG: &str = "theory S {
  op f : 2
  op g : 1
  op g' : 1
  axiom |- g(x) =[1] g'(x)
}
space X { x1 x2 x3 : d(x1,x2) = 1 }
term s = f('x1, g('x3))
term t = f('x2, g'('x3))
";

fn metriq(args: &[&str]) -> Output {
    run(std::iter::once("metriq").chain(args.iter().copied()), None)
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", out.stdout))
}

#[test]
fn prove_then_check_proof() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "t2.met", T2);
    let proof = dir.path().join("p.json").to_str().unwrap().to_string();
    let out = metriq(&["prove", &file, "--ctx", "x =[1] y", "--goal", "|- y =[1/2] x", "--out", &proof]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.starts_with("derivable"));
    let out = metriq(&["check-proof", &file, &proof]);
    assert_eq!(out.code, 0);
    assert!(out.stdout.contains("valid"));

    // A proof from another theory is rejected.
    let other = write(&dir, "empty.met", "theory E { }");
    assert_eq!(metriq(&["check-proof", &other, &proof]).code, 1);
}

#[test]
fn refl_in_the_empty_theory() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "e.met", "theory Empty { }");
    let out = metriq(&["--json", "prove", &file, "--goal", "|- x =[0] x"]);
    assert_eq!(out.code, 0);
    let v = json(&out);
    assert_eq!(v["derivable"], true);
    assert_eq!(v["proof"]["rule"], "Refl");
    assert_eq!(metriq(&["prove", &file, "--goal", "|- x =[0] y"]).code, 1);
}

#[test]
fn dist_on_the_strong_finitarity_pair() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "s.met", STRONG);
    let out = metriq(&["dist", &file, "--gens", "X", "--t1", "s", "--t2", "t", "--grid", "0,1/2,1,inf"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.trim_end().ends_with("= 1 (exact)"), "{}", out.stdout);
}

#[test]
fn free_model_json() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "t2.met", T2);
    let model = dir.path().join("m.json");
    let out = metriq(&["free", &file, "--gens", "A", "--depth", "2", "--out", model.to_str().unwrap()]);
    assert_eq!(out.code, 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 1);
    let far = metriq(&["--json", "free", &file, "--gens", "{ a b : d(a,b) = 11/10 }", "--depth", "2"]);
    let v = json(&far);
    assert_eq!(v["dist"][0][1], "11/10");
    assert_eq!(v["exactness"][0][1], "exact");
}

#[test]
fn json_output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "t2.met", T2);
    let args = ["--json", "free", &file, "--gens", "{ a b c : d(a,b) = 2, d(b,c) = 1, d(a,c) = 3 }"];
    let first = metriq(&args);
    assert_eq!(first.code, 0);
    assert_eq!(first.stdout, metriq(&args).stdout);
}

#[test]
fn countermodel_and_satisfy() {
    let dir = TempDir::new().unwrap();
    let out =
        metriq(&["--json", "countermodel", "builtin:semilattice", "--goal", "|- join(x, y) =[0] x", "--size", "2"]);
    assert_eq!(out.code, 0);
    let v = json(&out);
    let model = write(&dir, "m.json", &v["model"].to_string());
    let out = metriq(&["satisfy", "builtin:semilattice", "--model", &model]);
    assert_eq!(out.code, 0);
    assert_eq!(out.stdout.matches("satisfied").count(), 3);

    let out = metriq(&["countermodel", "builtin:t2", "--ctx", "x =[1] y", "--goal", "|- x =[0] y", "--size", "3"]);
    assert_eq!(out.code, 1);
    assert!(out.stdout.starts_with("none found"));
}

#[test]
fn check_reports_ill_formed_axioms() {
    let dir = TempDir::new().unwrap();
    let good = write(
        &dir,
        "t1.met",
        "theory T1 { arity P = { 0 1 : d(0,1)=1 } ; op f : P\n axiom { x =[1] y } |- f(x, y) =[0] f(y, x) }",
    );
    assert_eq!(metriq(&["check", &good]).code, 0);
    let bad = write(&dir, "bad.met", "theory T1 { arity P = { 0 1 : d(0,1)=1 } ; op f : P\n axiom |- f(x, y) =[0] x }");
    let out = metriq(&["check", &bad]);
    assert_eq!(out.code, 1);
    assert!(out.stdout.contains("f(x, y)"));
}

#[test]
fn parse_errors_are_positioned() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "bad.met", "theory T {\n  op f : P\n}");
    let out = metriq(&["--json", "check", &file]);
    assert_eq!(out.code, 3);
    let v = json(&out);
    assert_eq!(v["error"]["kind"], "parse");
    assert_eq!((v["error"]["line"].as_u64(), v["error"]["column"].as_u64()), (Some(2), Some(10)));
    let out = metriq(&["check", &file]);
    assert!(out.stderr.contains(":2:10: undeclared arity `P`"), "{}", out.stderr);
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(metriq(&["frobnicate"]).code, 3);
    assert_eq!(metriq(&["check", "/no/such/file"]).code, 3);
    assert_eq!(metriq(&["check", "builtin:nope"]).code, 3);
    assert_eq!(metriq(&["--depth", "0", "check", "builtin:t2"]).code, 3);
    assert_eq!(metriq(&["--help"]).code, 0);
}

#[test]
fn depth_precedence() {
    let goal = ["prove", "builtin:t1", "--ctx", "x =[1] y", "--goal", "|- f(f(x, y), f(x, y)) ok"];
    let with_env = |env: Option<&str>, extra: &[&str]| {
        let args: Vec<&str> = std::iter::once("metriq").chain(extra.iter().copied()).chain(goal).collect();
        run(args, env).code
    };
    assert_eq!(with_env(None, &[]), 0);
    assert_eq!(with_env(Some("1"), &[]), 3, "term deeper than the cap");
    assert_eq!(with_env(Some("1"), &["--depth", "2"]), 0);
    assert_eq!(with_env(Some("deep"), &[]), 3);
}

#[test]
fn demos_pass_where_expected() {
    for name in ["t2", "comp", "contraction", "strongfinit", "surj"] {
        let out = metriq(&["demo", name]);
        assert_eq!(out.code, 0, "{name}:\n{}", out.stdout);
        assert!(out.stdout.starts_with("quantity"));
    }
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_metriq");
    let status = |args: &[&str]| Command::new(bin).args(args).env_remove("METRIQ_DEPTH").output().unwrap();
    let out = status(&["demo", "t2"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("11/10"));
    assert_eq!(status(&["check", "/no/such/file"]).status.code(), Some(3));
    assert!(Path::new(bin).exists());
}
