use mtt_core::equiv::{decide, DecideOptions, Reason};
use mtt_core::model::{evaluate_axiom, Axiom, Dta, Mtt};
use mtt_core::syntax::{parse_spec, parse_tree};
use mtt_core::terms::{SymbolClass, TermStore};

const TOTAL: &str = include_str!("../../../fixtures/mtern_total.mtt");

fn load(s: &mut TermStore, text: &str) -> (Mtt, Axiom, Option<Dta>) {
    let spec = parse_spec(s, text).unwrap();
    (spec.mtt.unwrap(), spec.axiom.unwrap(), spec.dta)
}

fn trivial(s: &TermStore, m: &Mtt) -> Dta {
    Dta::trivial(s, &m.sigma)
}

#[test]
fn ternary_is_equivalent_to_itself() {
    let mut s = TermStore::new();
    let (m, a, _) = load(&mut s, TOTAL);
    let (m2, a2, _) = load(&mut s, TOTAL);
    let d = trivial(&s, &m);
    let v = decide(&mut s, (&m, &a), (&m2, &a2), &d, DecideOptions::default()).unwrap();
    assert!(v.equivalent, "{v:?}");
    assert!(v.rounds.unwrap() <= v.bound.unwrap());
}

#[test]
fn tampered_digit_is_found() {
    let mut s = TermStore::new();
    let (m, a, _) = load(&mut s, TOTAL);
    let tampered = TOTAL.replace(
        "rule S(i, y1) = *(i, EXP(3,y1)) where i in {0 1 2}, S in {q q' r}",
        "rule q(1, y1) = *(2, EXP(3,y1))\nrule q(i, y1) = *(i, EXP(3,y1)) where i in {0 2}\n\
         rule S(i, y1) = *(i, EXP(3,y1)) where i in {0 1 2}, S in {q' r}",
    );
    let (m2, a2, _) = load(&mut s, &tampered);
    assert_eq!(m2.rules().len(), 15);
    let d = trivial(&s, &m);
    let v = decide(&mut s, (&m, &a), (&m2, &a2), &d, DecideOptions::default()).unwrap();
    assert!(!v.equivalent);
    assert!(v.reason.is_some());
    let t = v
        .counterexample_tree
        .expect("oracle finds a counterexample");
    assert!(s.height(t) <= 2, "{}", s.render(t));
    let back = decide(&mut s, (&m2, &a2), (&m, &a), &d, DecideOptions::default()).unwrap();
    assert!(!back.equivalent);
}

const INVERSE_DEWEY: &str = "sigma { f/2 a/0 }\ndelta_o { f/2 a/1 }\ndelta_i { 1/1 2/1 e/0 }\n\
    params 1\nstate q\n\
    rule q(f(x1,x2), y1) = f(q(x1, 1(y1)), q(x2, 2(y1)))\n\
    rule q(a, y1) = a(y1)\naxiom = q(x1, e)\n";

#[test]
fn inverse_dewey_output_and_renamed_copy() {
    let mut s = TermStore::new();
    let (m, a, _) = load(&mut s, INVERSE_DEWEY);
    let t = parse_tree(&mut s, &m.sigma, SymbolClass::Input, "f(f(a,a),a)").unwrap();
    let out = evaluate_axiom(&mut s, &m, &a, t).unwrap();
    assert_eq!(s.render(out), "f(f(a(1(1(e))),a(2(1(e)))),a(2(e)))");
    let renamed = INVERSE_DEWEY
        .replace("q(", "walk(")
        .replace("state q", "state walk");
    let (m2, a2, _) = load(&mut s, &renamed);
    let d = trivial(&s, &m);
    let v = decide(&mut s, (&m, &a), (&m2, &a2), &d, DecideOptions::default()).unwrap();
    assert!(v.equivalent, "{v:?}");
}

const PHI_LEFT: &str = "sigma { f/1 g/0 h/0 }\ndelta_o { a/2 d/0 }\ndelta_i { b/2 c/1 z/0 }\n\
    params 2\nstate q\n\
    rule q(f(x1), y1, y2) = a(q(x1, b(y1,y1), c(y2)), d)\n\
    rule q(g, y1, y2) = y1\nrule q(h, y1, y2) = y2\naxiom = q(x1, c(z), z)\n\
    dta { states b; init b; trans b(f) -> (b); trans b(g) -> (); trans b(h) -> (); }\n";

fn phi_right(args: &str) -> String {
    format!(
        "sigma {{ f/1 g/0 h/0 }}\ndelta_o {{ a/2 d/0 }}\ndelta_i {{ b/2 c/1 z/0 }}\n\
         params 2\nstate q'\n\
         rule q'(f(x1), y1, y2) = a(q'(x1, c(y1), b(y2,y2)), d)\n\
         rule q'(g, y1, y2) = y2\nrule q'(h, y1, y2) = y1\naxiom = q'(x1, {args})\n"
    )
}

#[test]
fn pair_condition_decides_axiom_arguments() {
    let mut s = TermStore::new();
    let (m, a, d) = load(&mut s, PHI_LEFT);
    let d = d.unwrap();
    let (good, ga, _) = load(&mut s, &phi_right("z, c(z)"));
    let v = decide(&mut s, (&m, &a), (&good, &ga), &d, DecideOptions::default()).unwrap();
    assert!(v.equivalent, "{v:?}");

    let (bad, ba, _) = load(&mut s, &phi_right("c(z), z"));
    let v = decide(&mut s, (&m, &a), (&bad, &ba), &d, DecideOptions::default()).unwrap();
    assert!(!v.equivalent);
    assert!(matches!(v.reason, Some(Reason::PairCondition { .. })));
    let t = v.counterexample_tree.unwrap();
    assert!(s.height(t) <= 2);
}

#[test]
fn different_axiom_tops_are_reported() {
    let mut s = TermStore::new();
    let text =
        "sigma { a/0 }\ndelta_o { k/0 m/0 }\nparams 0\nstate q\nrule q(a) = k\naxiom = q(x1)\n";
    let (m, a, _) = load(&mut s, text);
    let (m2, a2, _) = load(&mut s, &text.replace("= k", "= m"));
    let d = trivial(&s, &m);
    let v = decide(&mut s, (&m, &a), (&m2, &a2), &d, DecideOptions::default()).unwrap();
    assert!(
        matches!(v.reason, Some(Reason::AxiomPattern { .. })),
        "{v:?}"
    );
    assert_eq!(v.counterexample.as_deref(), Some("a"));
}
