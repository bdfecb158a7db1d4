use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    root.join(name).display().to_string()
}

fn run(args: &[&str]) -> (i32, String) {
    let Output { status, stdout, .. } = Command::new(env!("CARGO_BIN_EXE_mtt-equiv"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        status.code().expect("exit code"),
        String::from_utf8(stdout).unwrap(),
    )
}

fn json(args: &[&str]) -> (i32, Value) {
    let (code, out) = run(args);
    (
        code,
        serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {out}")),
    )
}

fn tmp(name: &str) -> String {
    let dir = std::env::temp_dir().join(format!("mtt-equiv-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name).display().to_string()
}

const GOLDEN: &str =
    "+(+(*(1,EXP(3,z)),+(*(0,EXP(3,s(z))),+(*(1,EXP(3,s(s(z)))),*(2,EXP(3,s(s(s(z)))))))),\
+(*(0,EXP(3,p(z))),*(2,EXP(3,p(p(z))))))";

#[test]
fn eval_prints_golden_tree() {
    let (code, out) = run(&[
        "--text",
        "eval",
        &fixture("mtern.mtt"),
        "--input",
        "g(f(f(f(2,1),0),1),f(0,2))",
    ]);
    assert_eq!(code, 0);
    assert_eq!(out.trim(), GOLDEN);
    let (_, v) = json(&[
        "eval",
        &fixture("mtern.mtt"),
        "--input",
        "g(f(f(f(2,1),0),1),f(0,2))",
    ]);
    assert_eq!(v["output"], GOLDEN);
}

#[test]
fn eval_state_with_params() {
    let (code, v) = json(&[
        "eval",
        &fixture("mtern.mtt"),
        "--input",
        "2",
        "--state",
        "r",
        "--params",
        "s(z)",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["output"], "*(2,EXP(3,s(z)))");
    let (code, _) = json(&[
        "eval",
        &fixture("mtern.mtt"),
        "--input",
        "f(0,1)",
        "--state",
        "r",
        "--params",
        "z",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn prefixes_json() {
    let (code, v) = json(&["prefixes", &fixture("mtern_total.mtt")]);
    assert_eq!(code, 0);
    assert_eq!(
        v,
        serde_json::json!({"q": "⊤", "q'": "⊤", "r": "*(⊤,EXP(3,⊤))"})
    );
}

#[test]
fn equiv_exit_codes() {
    let (code, v) = json(&["equiv", &fixture("mtern.mtt"), &fixture("mtern.mtt")]);
    assert_eq!(code, 0);
    assert_eq!(v["verdict"], "equivalent");
    let (code, v) = json(&[
        "equiv",
        &fixture("mtern_total.mtt"),
        &fixture("mtern_total.mtt"),
        "--full",
        "--explain",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["pipeline"], "total");
    assert!(v["rounds"].as_u64().unwrap() <= v["bound"].as_u64().unwrap());
    let (code, v) = json(&[
        "equiv",
        &fixture("mtern.mtt"),
        &fixture("mtern_total.mtt"),
        "--oracle-check",
        "3",
    ]);
    assert_eq!(code, 1);
    assert_eq!(v["reason"]["check"], "domain");
    assert_eq!(v["oracle"]["mismatch"], false);
}

#[test]
fn usage_errors_exit_two() {
    let (code, v) = json(&["equiv", &fixture("mtern.mtt"), "/nonexistent.mtt"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"], "usage");
    let bad = tmp("bad.mtt");
    std::fs::write(&bad, "sigma { a/0 }\ndelta_o { a/0 }\ndelta_i { }\nparams 1\nstate q\nrule q(a, y1) =\naxiom = q(x1, z)\n")
        .unwrap();
    let (code, v) = json(&["validate", &bad]);
    assert_eq!(code, 2);
    assert!(v["message"].as_str().unwrap().contains(':'));
    let (code, _) = run(&["equiv"]);
    assert_eq!(code, 2);
}

#[test]
fn validate_total_and_partial() {
    let (code, v) = json(&["validate", &fixture("mtern.mtt")]);
    assert_eq!(code, 2);
    assert_eq!(v["issues"][0]["kind"], "missing_rule");
    let (code, v) = json(&["validate", &fixture("mtern.mtt"), "--partial"]);
    assert_eq!(code, 0);
    assert_eq!(v["valid"], true);
    let (code, _) = json(&["validate", &fixture("mtern_domain.dta")]);
    assert_eq!(code, 0);
}

#[test]
fn earliest_output_reparses_and_agrees() {
    let out = tmp("earliest.mtt");
    let (code, v) = json(&["earliest", &fixture("mtern_total.mtt"), "-o", &out]);
    assert_eq!(code, 0);
    assert_eq!(v["states"], 3);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(
        text.contains("q@ε(f(x1,x2), y1) = +(*(r@1(x2, y1), EXP(3, y1)), q@ε(x1, s(y1)))"),
        "{text}"
    );
    let (code, v) = json(&["oracle", &fixture("mtern_total.mtt"), &out, "--height", "3"]);
    assert_eq!(code, 0, "{v}");
    let (code, _) = json(&["equiv", &fixture("mtern_total.mtt"), &out]);
    assert_eq!(code, 0);
}

#[test]
fn oracle_reports_outputs() {
    let (code, v) = json(&[
        "oracle",
        &fixture("mtern.mtt"),
        &fixture("mtern_total.mtt"),
        "--height",
        "3",
    ]);
    assert_eq!(code, 1);
    assert_eq!(v["first"], Value::Null);
    assert!(v["second"].is_string());
}

#[test]
fn totalize_domain_and_dta_equiv() {
    let total = tmp("tot.mtt");
    let (code, v) = json(&[
        "totalize",
        &fixture("mtern.mtt"),
        "--bottom",
        "bot",
        "-o",
        &total,
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["added_rules"], 3);
    let (code, _) = json(&["validate", &total]);
    assert_eq!(code, 0);
    let (code, _) = json(&[
        "totalize",
        &fixture("mtern.mtt"),
        "--bottom",
        "EXP",
        "-o",
        &total,
    ]);
    assert_eq!(code, 2);

    let dom = tmp("dom.dta");
    let (code, v) = json(&["domain", &fixture("mtern.mtt"), "-o", &dom]);
    assert_eq!(code, 0);
    assert_eq!(v["empty"], false);
    let (code, v) = json(&["dta-equiv", &dom, &dom]);
    assert_eq!(code, 0);
    assert_eq!(v["equivalent"], true);
    let (code, v) = json(&["dta-equiv", &dom, &fixture("mtern_domain.dta")]);
    assert_eq!(code, 1);
    assert!(v["witness"].is_string());
}

const LA: &str = "sigma { f/1 a/0 b/0 }\ndelta_o { c/1 d/0 e/0 }\ndelta_i { }\nparams 0\nstate q\n\
lookahead {\n  states ea eb;\n  trans a -> ea;\n  trans b -> eb;\n  trans f(ea) -> ea;\n  trans f(eb) -> eb;\n}\n\
rule q(f(x1)) <ea> = c(q(x1))\nrule q(f(x1)) <eb> = c(q(x1))\n\
rule q(a) <> = d\nrule q(b) <> = e\naxiom = q(x1)\n";

#[test]
fn remove_lookahead_writes_three_files() {
    let la = tmp("la.mtt");
    std::fs::write(&la, LA).unwrap();
    let prefix = tmp("free");
    let (code, v) = json(&["remove-lookahead", &la, &la, "--o-prefix", &prefix]);
    assert_eq!(code, 0, "{v}");
    for key in ["first", "second", "dta"] {
        assert!(std::path::Path::new(v[key].as_str().unwrap()).exists());
    }
    let (code, v) = json(&[
        "equiv",
        v["first"].as_str().unwrap(),
        v["second"].as_str().unwrap(),
        "--dta",
        v["dta"].as_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{v}");
}
