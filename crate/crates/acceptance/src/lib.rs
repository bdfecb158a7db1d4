//! Acceptance checks, one function per criterion. Each returns whether it
//! passed and a one-line summary of what it measured.

use std::collections::HashMap;
use std::ops::ControlFlow;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::Rng;

use mtt_core::applications::{decide_partial, domain_dta, dta_equiv};
use mtt_core::corpus::{self, Alphabets, Shape};
use mtt_core::earliest::{compute_prefixes, earliest_transform};
use mtt_core::equiv::{
    decide, normalize, psi_step, stabilize, Coverage, DecideError, DecideOptions, Normalized, Side,
};
use mtt_core::herbrand::{eval_ground, reduce, Conjunction};
use mtt_core::model::{
    dta_analyze, evaluate_axiom, product_annotate, render_rule, Axiom, Dta, Evaluator, Mode, Mtt,
    StateId,
};
use mtt_core::oracle::{
    for_each_input, oracle_decide, oracle_decide_partial, EnumBudget, OracleOutcome,
};
use mtt_core::syntax::{parse_spec, parse_tree};
use mtt_core::terms::{SymbolClass, TermId, TermStore, Var};

pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

pub type Check = fn() -> Outcome;

pub const CRITERIA: &[(&str, Check)] = &[
    ("golden evaluation", golden_evaluation),
    ("prefix table", prefix_table),
    ("earliest form", earliest_form),
    ("psi stabilization", psi_stabilization),
    ("phi stabilization", phi_stabilization),
    ("phi versus bounded agreement", phi_versus_bounded_agreement),
    ("oracle agreement", oracle_agreement),
    ("stabilization bound", stabilization_bound),
    ("shared subterms", shared_subterms),
    ("partial pipeline", partial_pipeline),
    ("inverse dewey", inverse_dewey),
];

const PARTIAL: &str = include_str!("../../../fixtures/mtern.mtt");
const TOTAL: &str = include_str!("../../../fixtures/mtern_total.mtt");
const DOMAIN: &str = include_str!("../../../fixtures/mtern_domain.dta");

const GOLDEN_INPUT: &str = "g(f(f(f(2,1),0),1),f(0,2))";
const GOLDEN: &str =
    "+(+(*(1,EXP(3,z)),+(*(0,EXP(3,s(z))),+(*(1,EXP(3,s(s(z)))),*(2,EXP(3,s(s(s(z)))))))),\
+(*(0,EXP(3,p(z))),*(2,EXP(3,p(p(z))))))";

fn load(s: &mut TermStore, text: &str) -> (Mtt, Axiom, Option<Dta>) {
    let spec = parse_spec(s, text).expect("fixture parses");
    (
        spec.mtt.expect("transducer"),
        spec.axiom.expect("axiom"),
        spec.dta,
    )
}

fn trivial(s: &mut TermStore, m: &Mtt) -> Dta {
    let raw = Dta::trivial(s, &m.sigma);
    dta_analyze(s, &raw).expect("trivial automaton is productive")
}

fn unbounded(h: usize) -> EnumBudget {
    EnumBudget {
        max_height: h,
        max_count: usize::MAX,
    }
}

fn golden_evaluation() -> Outcome {
    let start = Instant::now();
    let mut s = TermStore::new();
    let (m, a, _) = load(&mut s, PARTIAL);
    let t = parse_tree(&mut s, &m.sigma, SymbolClass::Input, GOLDEN_INPUT).unwrap();
    let out = match evaluate_axiom(&mut s, &m, &a, t) {
        Ok(o) => s.render(o),
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    let took = start.elapsed();
    Outcome::new(
        out == GOLDEN && took < Duration::from_secs(1),
        format!("output matches: {}, {} ms", out == GOLDEN, took.as_millis()),
    )
}

fn annotated_total(s: &mut TermStore) -> (Mtt, Axiom, mtt_core::model::StateMap, Dta) {
    let (m, a, _) = load(s, TOTAL);
    let d = trivial(s, &m);
    let (pm, pa, pi) = product_annotate(s, &m, &a, &d, Mode::Total).unwrap();
    (pm, pa, pi, d)
}

fn prefix_table() -> Outcome {
    let mut s = TermStore::new();
    let (m, _, pi, d) = annotated_total(&mut s);
    let table = compute_prefixes(&mut s, &m, &pi, &d).unwrap();
    let shown: Vec<String> = m
        .state_ids()
        .map(|q| format!("{}={}", m.state_name(q), s.render_pattern(table.get(q))))
        .collect();
    let want = ["q=⊤", "q'=⊤", "r=*(⊤,EXP(3,⊤))"];
    Outcome::new(
        shown == want && table.passes <= 2,
        format!("{} in {} passes", shown.join(" "), table.passes),
    )
}

fn earliest_form() -> Outcome {
    let start = Instant::now();
    let mut s = TermStore::new();
    let (orig, orig_axiom, _) = load(&mut s, TOTAL);
    let (m, a, pi, d) = annotated_total(&mut s);
    let (e, ea, _, _) = earliest_transform(&mut s, &m, &a, &pi, &d).unwrap();
    let rules: Vec<String> = e.rules().iter().map(|r| render_rule(&s, &e, r)).collect();
    let main_rule = rules
        .iter()
        .any(|r| r == "q@ε(f(x1,x2), y1) = +(*(r@1(x2, y1), EXP(3, y1)), q@ε(x1, s(y1)))");
    let leaves = ["0", "1", "2"]
        .iter()
        .all(|i| rules.contains(&format!("r@1({i}, y1) = {i}")));
    let outcome = oracle_decide(
        &mut s,
        (&orig, &orig_axiom),
        (&e, &ea),
        Some(&d),
        unbounded(4),
    );
    let took = start.elapsed();
    let (agree, detail) = match outcome {
        Ok(OracleOutcome::AgreeUpToBudget { checked }) => {
            (true, format!("agree on {checked} inputs"))
        }
        Ok(OracleOutcome::Counterexample(t)) => (false, format!("differ on {}", s.render(t))),
        Err(err) => (false, err.to_string()),
    };
    Outcome::new(
        main_rule && leaves && agree && took < Duration::from_secs(30),
        format!("recursive rule: {main_rule}, leaf rules: {leaves}, {detail} of height at most 4"),
    )
}

fn inner(s: &mut TermStore, name: &str, kids: &[TermId]) -> TermId {
    let f = s
        .lookup(SymbolClass::Inner, name)
        .expect("declared parameter symbol");
    s.intern(f, kids).unwrap()
}

const PSI: &str = "sigma { a/0 f/1 }\ndelta_o { }\ndelta_i { h/1 b/0 }\nparams 2\nstate q\n\
    rule q(a, y1, y2) = y1\nrule q(f(x1), y1, y2) = q(x1, h(y2), b)\naxiom = q(x1, b, b)\n";

fn psi_stabilization() -> Outcome {
    let mut s = TermStore::new();
    let (m, a, _) = load(&mut s, PSI);
    let d = trivial(&mut s, &m);
    let (pm, _, pi) = product_annotate(&s, &m, &a, &d, Mode::Total).unwrap();
    let side = Side::new(&mut s, pm, pi, &d, false);
    let q = StateId(0);
    let mut rounds = vec![psi_step(&mut s, &side, None, &[q])];
    for _ in 0..3 {
        let next = psi_step(&mut s, &side, rounds.last(), &[q]);
        rounds.push(next);
    }
    let z = s.var(Var::Z);
    let y1 = s.var(Var::Y(1));
    let y2 = s.var(Var::Y(2));
    let b = inner(&mut s, "b", &[]);
    let hy2 = inner(&mut s, "h", &[y2]);
    let hb = inner(&mut s, "h", &[b]);
    let want = [
        reduce(&mut s, &[(z, y1)]),
        reduce(&mut s, &[(z, y1), (z, hy2)]),
        reduce(&mut s, &[(z, hb), (y1, hb), (y2, b)]),
        reduce(&mut s, &[(z, hb), (y1, hb), (y2, b)]),
    ];
    let got: Vec<&Conjunction> = rounds.iter().map(|r| &r[&q]).collect();
    let exact = got.iter().zip(&want).all(|(g, w)| *g == w);
    let shown: Vec<String> = got.iter().map(|c| c.render(&s)).collect();
    Outcome::new(
        exact && got[2] == got[3],
        format!("rounds 0..3: {}", shown.join(" | ")),
    )
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

fn phi_stabilization() -> Outcome {
    let mut s = TermStore::new();
    let (m, a, d) = load(&mut s, PHI_LEFT);
    let raw = d.expect("automaton block");
    let d = dta_analyze(&mut s, &raw).unwrap();
    let (good, ga, _) = load(&mut s, &phi_right("z, c(z)"));
    let (bad, ba, _) = load(&mut s, &phi_right("c(z), z"));

    let (pm, _, pi) = product_annotate(&s, &m, &a, &d, Mode::Total).unwrap();
    let (pm2, _, pi2) = product_annotate(&s, &good, &ga, &d, Mode::Total).unwrap();
    let left = Side::new(&mut s, pm, pi, &d, false);
    let right = Side::new(&mut s, pm2, pi2, &d, true);
    let key = (StateId(0), StateId(0));
    let st = match stabilize(&mut s, &left, &right, &d, &[key], Coverage::Full) {
        Ok(st) => st,
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    let y1 = s.var(Var::Y(1));
    let y2 = s.var(Var::Y(2));
    let y1p = s.var(Var::YPrime(1));
    let y2p = s.var(Var::YPrime(2));
    let want = reduce(&mut s, &[(y1, y2p), (y2, y1p)]);
    let rounds_ok =
        st.rounds[0].phi[&key] == want && st.rounds[1].phi[&key] == want && st.stable_at == 0;

    let opts = DecideOptions {
        search_cap: None,
        ..DecideOptions::default()
    };
    let sat = decide(&mut s, (&m, &a), (&good, &ga), &raw, opts).map(|v| v.equivalent);
    let viol = decide(&mut s, (&m, &a), (&bad, &ba), &raw, opts).map(|v| v.equivalent);
    let witness = oracle_decide(&mut s, (&m, &a), (&bad, &ba), Some(&d), unbounded(2))
        .ok()
        .and_then(OracleOutcome::counterexample);
    let passed = rounds_ok && sat == Ok(true) && viol == Ok(false) && witness.is_some();
    Outcome::new(
        passed,
        format!(
            "phi(0) = {}, stable at {}, satisfying axiom equivalent: {:?}, violating axiom equivalent: {:?}, oracle witness: {}",
            st.rounds[0].phi[&key].render(&s),
            st.stable_at,
            sat.map_err(|e| e.to_string()),
            viol.map_err(|e| e.to_string()),
            witness.map_or("none".into(), |t| s.render(t)),
        ),
    )
}

/// Random alphabets, a random productive automaton (or the trivial one) and
/// a random total transducer.
fn random_setup(s: &mut TermStore, rng: &mut StdRng) -> (Alphabets, Dta, Mtt, Axiom) {
    let alph = corpus::random_alphabets(s, rng);
    let raw = corpus::random_dta(s, rng, &alph.sigma);
    let d = match dta_analyze(s, &raw) {
        Ok(d) if rng.gen_bool(0.6) => d,
        _ => {
            let t = Dta::trivial(s, &alph.sigma);
            dta_analyze(s, &t).unwrap()
        }
    };
    let (m, a) = corpus::random_mtt(s, rng, &alph, Shape::default());
    (alph, d, m, a)
}

/// A second transducer: an equivalent variant, a mutation, or an unrelated one.
fn partner(
    s: &mut TermStore,
    rng: &mut StdRng,
    alph: &Alphabets,
    m: &Mtt,
    a: &Axiom,
) -> (Mtt, Axiom) {
    match rng.gen_range(0..3) {
        0 => corpus::equivalent_variant(s, m, a, rng),
        1 => corpus::mutate(s, m, a, alph, rng),
        _ => corpus::random_mtt(s, rng, alph, Shape::default()),
    }
}

#[derive(Default)]
struct BoundStats {
    runs: usize,
    max_rounds: usize,
    worst_ratio: f64,
    exceeded: usize,
}

impl BoundStats {
    fn record(&mut self, stable_at: usize, bound: usize) {
        self.runs += 1;
        self.max_rounds = self.max_rounds.max(stable_at);
        self.worst_ratio = self.worst_ratio.max(stable_at as f64 / bound as f64);
        if stable_at > bound {
            self.exceeded += 1;
        }
    }

    fn summary(&self) -> String {
        format!(
            "{} runs, max stable round {}, worst round/bound {:.3}, {} exceeded",
            self.runs, self.max_rounds, self.worst_ratio, self.exceeded
        )
    }
}

struct PhiCheck {
    state_pairs: usize,
    vectors: usize,
    literal_mismatches: usize,
    literal_checked: usize,
    mismatch_by_round: [usize; 4],
    stable_unsound: usize,
    stable_unconfirmed: usize,
    descent_violations: usize,
    bounds: BoundStats,
    errors: usize,
}

fn ground_values(s: &mut TermStore, delta_i: &[mtt_core::terms::SymId]) -> Vec<TermId> {
    let mut out = Vec::new();
    for_each_input(s, delta_i, None, unbounded(2), &mut |_, t| {
        out.push(t);
        ControlFlow::Continue(())
    });
    out
}

fn vectors(values: &[TermId], l: usize) -> Vec<Vec<TermId>> {
    let mut out = vec![Vec::new()];
    for _ in 0..l {
        out = out
            .into_iter()
            .flat_map(|v| {
                values.iter().map(move |&x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

/// Height of the first input accepted from `b` on which the two state calls
/// differ, if any up to `cap`.
fn first_difference(
    s: &mut TermStore,
    left: (&mut Evaluator, StateId, &[TermId]),
    right: (&mut Evaluator, StateId, &[TermId]),
    d: &Dta,
    b: mtt_core::model::DState,
    sigma: &[mtt_core::terms::SymId],
    cap: usize,
) -> Option<usize> {
    let (e1, q1, p1) = left;
    let (e2, q2, p2) = right;
    let mut found = None;
    for_each_input(s, sigma, Some((d, b)), unbounded(cap), &mut |s, t| {
        let o1 = e1.state(s, q1, t, p1).expect("total on the automaton");
        let o2 = e2.state(s, q2, t, p2).expect("total on the automaton");
        if o1 != o2 {
            found = Some(s.height(t));
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    });
    found
}

fn run_phi_check(seed: u64, want_pairs: usize) -> PhiCheck {
    let mut rng = corpus::rng(seed);
    let mut c = PhiCheck {
        state_pairs: 0,
        vectors: 0,
        literal_mismatches: 0,
        literal_checked: 0,
        mismatch_by_round: [0; 4],
        stable_unsound: 0,
        stable_unconfirmed: 0,
        descent_violations: 0,
        bounds: BoundStats::default(),
        errors: 0,
    };
    let shape = Shape {
        max_states: 3,
        ..Shape::default()
    };
    while c.state_pairs < want_pairs {
        let mut s = TermStore::new();
        let alph = corpus::random_alphabets(&mut s, &mut rng);
        let raw = corpus::random_dta(&s, &mut rng, &alph.sigma);
        let d = match dta_analyze(&mut s, &raw) {
            Ok(d) => d,
            Err(_) => continue,
        };
        let (m, a) = corpus::random_mtt(&mut s, &mut rng, &alph, shape);
        let (m2, a2) = partner(&mut s, &mut rng, &alph, &m, &a);
        let (n1, n2) = match (
            normalize(&mut s, &m, &a, &d),
            normalize(&mut s, &m2, &a2, &d),
        ) {
            (Ok(x), Ok(y)) => (x, y),
            _ => {
                c.errors += 1;
                continue;
            }
        };
        if n1.mtt.states.len() > 4 || n2.mtt.states.len() > 4 {
            continue;
        }
        phi_check_pair(&mut s, &alph, &d, &n1, &n2, &mut c);
    }
    c
}

fn phi_check_pair(
    s: &mut TermStore,
    alph: &Alphabets,
    d: &Dta,
    n1: &Normalized,
    n2: &Normalized,
    c: &mut PhiCheck,
) {
    let left = Side::new(s, n1.mtt.clone(), n1.pi.clone(), d, false);
    let right = Side::new(s, n2.mtt.clone(), n2.pi.clone(), d, true);
    let st = match stabilize(s, &left, &right, d, &[], Coverage::Full) {
        Ok(st) => st,
        Err(DecideError::BoundExceeded { bound }) => {
            c.bounds.record(bound + 1, bound);
            return;
        }
        Err(_) => {
            c.errors += 1;
            return;
        }
    };
    c.bounds.record(st.stable_at, st.bound);
    for w in st.rounds.windows(2) {
        for (k, later) in &w[1].phi {
            if !mtt_core::herbrand::conj_implies(s, later, &w[0].phi[k]) {
                c.descent_violations += 1;
            }
        }
    }
    let values = ground_values(s, &alph.delta_i);
    let left_vectors = vectors(&values, n1.mtt.params);
    let right_vectors = vectors(&values, n2.mtt.params);
    let mut e1 = Evaluator::new(&n1.mtt);
    let mut e2 = Evaluator::new(&n2.mtt);
    let keys: Vec<(StateId, StateId)> = st.last().phi.keys().copied().collect();
    for (q1, q2) in keys {
        c.state_pairs += 1;
        let b = n1.pi.get(q1);
        let round_of = |h: usize| &st.rounds[h.min(st.rounds.len() - 1)].phi[&(q1, q2)];
        for v1 in &left_vectors {
            for v2 in &right_vectors {
                c.vectors += 1;
                let mut sigma: HashMap<Var, TermId> = HashMap::new();
                for (j, &t) in v1.iter().enumerate() {
                    sigma.insert(Var::param(j + 1, false), t);
                }
                for (j, &t) in v2.iter().enumerate() {
                    sigma.insert(Var::param(j + 1, true), t);
                }
                let diff = first_difference(
                    s,
                    (&mut e1, q1, v1),
                    (&mut e2, q2, v2),
                    d,
                    b,
                    &alph.sigma,
                    3,
                );
                for h in 0..=3 {
                    let holds =
                        eval_ground(s, round_of(h), &sigma).expect("vector covers every parameter");
                    let agree = diff.is_none_or(|dh| dh > h);
                    c.literal_checked += 1;
                    if holds != agree {
                        c.literal_mismatches += 1;
                        c.mismatch_by_round[h] += 1;
                    }
                }
                let stable = eval_ground(s, &st.last().phi[&(q1, q2)], &sigma)
                    .expect("vector covers every parameter");
                if stable && diff.is_some() {
                    c.stable_unsound += 1;
                } else if !stable && diff.is_none() {
                    let deeper = first_difference(
                        s,
                        (&mut e1, q1, v1),
                        (&mut e2, q2, v2),
                        d,
                        b,
                        &alph.sigma,
                        5,
                    );
                    if deeper.is_none() {
                        c.stable_unconfirmed += 1;
                    }
                }
            }
        }
    }
}

static PHI_CHECK: OnceLock<(PhiCheck, Duration)> = OnceLock::new();
static ORACLE_RUN: OnceLock<(OracleRun, Duration)> = OnceLock::new();

fn phi_check() -> &'static (PhiCheck, Duration) {
    PHI_CHECK.get_or_init(|| {
        let start = Instant::now();
        let c = run_phi_check(corpus::seed_from_env(6), 200);
        (c, start.elapsed())
    })
}

fn oracle_run() -> &'static (OracleRun, Duration) {
    ORACLE_RUN.get_or_init(|| {
        let start = Instant::now();
        let r = run_oracle_agreement(corpus::seed_from_env(7), 500);
        (r, start.elapsed())
    })
}

fn phi_versus_bounded_agreement() -> Outcome {
    let (c, took) = phi_check();
    let took = *took;
    let passed = c.literal_mismatches == 0 && c.errors == 0 && took < Duration::from_secs(300);
    Outcome::new(
        passed,
        format!(
            "{} state pairs, {} parameter vector pairs; literal check: {} of {} disagree (by round 0..3: {:?}); \
             stable conjunction: {} unsound, {} not confirmed by height 5; descent violations {}; errors {}",
            c.state_pairs,
            c.vectors,
            c.literal_mismatches,
            c.literal_checked,
            c.mismatch_by_round,
            c.stable_unsound,
            c.stable_unconfirmed,
            c.descent_violations,
            c.errors,
        ),
    )
}

struct OracleRun {
    pairs: usize,
    equivalent: usize,
    hard_mismatches: Vec<String>,
    confirmed_at: [usize; 3],
    outstanding: Vec<String>,
    errors: Vec<String>,
    bounds: BoundStats,
}

fn run_oracle_agreement(seed: u64, count: usize) -> OracleRun {
    let mut rng = corpus::rng(seed);
    let mut r = OracleRun {
        pairs: 0,
        equivalent: 0,
        hard_mismatches: Vec::new(),
        confirmed_at: [0; 3],
        outstanding: Vec::new(),
        errors: Vec::new(),
        bounds: BoundStats::default(),
    };
    let opts = DecideOptions {
        search_cap: None,
        ..DecideOptions::default()
    };
    for case in 0..count {
        let mut s = TermStore::new();
        let (alph, d, m, a) = random_setup(&mut s, &mut rng);
        let (m2, a2) = partner(&mut s, &mut rng, &alph, &m, &a);
        r.pairs += 1;
        let v = match decide(&mut s, (&m, &a), (&m2, &a2), &d, opts) {
            Ok(v) => v,
            Err(DecideError::BoundExceeded { bound }) => {
                r.bounds.record(bound + 1, bound);
                r.errors
                    .push(format!("case {case}: bound {bound} exceeded"));
                continue;
            }
            Err(e) => {
                r.errors.push(format!("case {case}: {e}"));
                continue;
            }
        };
        if let (Some(rounds), Some(bound)) = (v.rounds, v.bound) {
            r.bounds.record(rounds, bound);
        }
        let search = |s: &mut TermStore, h: usize, max_count: usize| {
            oracle_decide(
                s,
                (&m, &a),
                (&m2, &a2),
                Some(&d),
                EnumBudget {
                    max_height: h,
                    max_count,
                },
            )
            .ok()
            .and_then(OracleOutcome::counterexample)
        };
        let found = search(&mut s, 4, usize::MAX);
        if v.equivalent {
            r.equivalent += 1;
            if let Some(t) = found {
                r.hard_mismatches
                    .push(format!("case {case}: oracle differs on {}", s.render(t)));
            }
            continue;
        }
        if found.is_some() {
            r.confirmed_at[0] += 1;
        } else if search(&mut s, 6, 3_000_000).is_some() {
            r.confirmed_at[1] += 1;
        } else if search(&mut s, 8, 20_000_000).is_some() {
            r.confirmed_at[2] += 1;
        } else {
            r.outstanding.push(format!("case {case}"));
        }
    }
    r
}

fn oracle_agreement() -> Outcome {
    let (r, took) = oracle_run();
    let took = *took;
    let passed = r.hard_mismatches.is_empty()
        && r.outstanding.is_empty()
        && r.errors.is_empty()
        && took < Duration::from_secs(900);
    let mut detail = format!(
        "{} pairs, {} equivalent, inequivalent confirmed at height 4/6/8: {:?}, outstanding {}, mismatches {}, errors {}",
        r.pairs,
        r.equivalent,
        r.confirmed_at,
        r.outstanding.len(),
        r.hard_mismatches.len(),
        r.errors.len()
    );
    for line in r
        .hard_mismatches
        .iter()
        .chain(&r.outstanding)
        .chain(&r.errors)
        .take(5)
    {
        detail.push_str(&format!("; {line}"));
    }
    Outcome::new(passed, detail)
}

fn stabilization_bound() -> Outcome {
    let (phi, _) = phi_check();
    let (oracle, _) = oracle_run();
    let passed = phi.bounds.exceeded == 0 && oracle.bounds.exceeded == 0;
    Outcome::new(
        passed,
        format!(
            "state pair runs: {}; transducer pair runs: {}",
            phi.bounds.summary(),
            oracle.bounds.summary()
        ),
    )
}

/// `q_i(g(x1), y1) = q_{i+1}(x1, t(y1, y1))`: the parameter doubles at every level.
fn doubling_chain(n: usize, prefix: &str) -> String {
    let mut text =
        String::from("sigma { g/1 a/0 }\ndelta_o { o/1 }\ndelta_i { t/2 z/0 }\nparams 1\nstate");
    for i in 0..=n {
        text.push_str(&format!(" {prefix}{i}"));
    }
    text.push('\n');
    for i in 0..n {
        text.push_str(&format!(
            "rule {prefix}{i}(g(x1), y1) = {prefix}{}(x1, t(y1, y1))\n",
            i + 1
        ));
    }
    text.push_str(&format!("rule {prefix}{n}(g(x1), y1) = o(y1)\n"));
    text.push_str(&format!(
        "rule S(a, y1) = o(y1) where S in {{{}}}\n",
        (0..=n)
            .map(|i| format!("{prefix}{i}"))
            .collect::<Vec<_>>()
            .join(" ")
    ));
    text.push_str(&format!("axiom = {prefix}0(x1, z)\n"));
    text
}

/// Evaluates the chain on `g^n(a)`, then decides it against a renamed copy
/// and against a copy whose last level differs. Returns elapsed time, store
/// growth and whether both verdicts are right.
fn chain_run(n: usize) -> (Duration, usize, bool) {
    let mut s = TermStore::new();
    let (m, a, _) = load(&mut s, &doubling_chain(n, "q"));
    let (m2, a2, _) = load(&mut s, &doubling_chain(n, "p"));
    let tweaked = doubling_chain(n, "p").replace(
        &format!("rule p{n}(g(x1), y1) = o(y1)"),
        &format!("rule p{n}(g(x1), y1) = o(o(y1))"),
    );
    let (m3, a3, _) = load(&mut s, &tweaked);
    let mut input = parse_tree(&mut s, &m.sigma, SymbolClass::Input, "a").unwrap();
    let g = s.lookup(SymbolClass::Input, "g").unwrap();
    for _ in 0..=n {
        input = s.intern(g, &[input]).unwrap();
    }
    let d = Dta::trivial(&s, &m.sigma);
    let opts = DecideOptions {
        search_cap: Some(n + 3),
        ..DecideOptions::default()
    };
    let before = s.len();
    let start = Instant::now();
    let evaluated = evaluate_axiom(&mut s, &m, &a, input).is_ok();
    let same = decide(&mut s, (&m, &a), (&m2, &a2), &d, opts).map(|v| v.equivalent);
    let differs = decide(&mut s, (&m, &a), (&m3, &a3), &d, opts)
        .map(|v| !v.equivalent && v.counterexample_tree == Some(input));
    let took = start.elapsed();
    (
        took,
        s.len() - before,
        evaluated && same == Ok(true) && differs == Ok(true),
    )
}

fn shared_subterms() -> Outcome {
    let mut s = TermStore::new();
    let t = s.symbol("t", 2, SymbolClass::Inner).unwrap();
    let n = 20u32;
    let mut eqs = Vec::new();
    for i in 1..n {
        let next = s.var(Var::Y(i + 1));
        let pair = s.intern(t, &[next, next]).unwrap();
        eqs.push((s.var(Var::Y(i)), pair));
    }
    let start = Instant::now();
    let before = s.len();
    let c = reduce(&mut s, &eqs);
    let herbrand_time = start.elapsed();
    let herbrand_growth = s.len() - before;
    let herbrand_ok = !c.is_false()
        && herbrand_time < Duration::from_secs(2)
        && herbrand_growth < 10 * n as usize;

    let (t15, g15, ok15) = chain_run(15);
    let (t30, g30, ok30) = chain_run(30);
    let linear = g30 <= 3 * g15;
    let passed = herbrand_ok && ok15 && ok30 && t30 < Duration::from_secs(2) && linear;
    Outcome::new(
        passed,
        format!(
            "chain of 20 equations: {} new nodes in {} ms; doubling transducer 15 levels: {} nodes, {} ms; \
             30 levels: {} nodes, {} ms; verdicts right: {}",
            herbrand_growth,
            herbrand_time.as_millis(),
            g15,
            t15.as_millis(),
            g30,
            t30.as_millis(),
            ok15 && ok30
        ),
    )
}

fn partial_pipeline() -> Outcome {
    let mut s = TermStore::new();
    let (m, a, _) = load(&mut s, PARTIAL);
    let raw = domain_dta(&s, &m, &a);
    let computed = dta_analyze(&mut s, &raw).unwrap();
    let spec = parse_spec(&mut s, DOMAIN).unwrap();
    let hand = dta_analyze(&mut s, &spec.dta.unwrap()).unwrap();
    let cmp = dta_equiv(&mut s, &computed, &hand);
    let domain_detail = match cmp.witness {
        None => "domain automaton matches the hand-written one".to_string(),
        Some(w) => format!(
            "domain automaton differs from the hand-written one on {} (transducer defined: {})",
            s.render(w),
            computed.accepts(&s, w)
        ),
    };

    let mut rng = corpus::rng(corpus::seed_from_env(10));
    let mut agree = 0;
    let mut deeper = 0;
    let mut problems = Vec::new();
    for case in 0..100 {
        let mut s = TermStore::new();
        let alph = corpus::random_alphabets(&mut s, &mut rng);
        let (m, a) = corpus::random_mtt(&mut s, &mut rng, &alph, Shape::default());
        let p1 = corpus::make_partial(&m, &mut rng, 0.15);
        let (m2, a2) = partner(&mut s, &mut rng, &alph, &m, &a);
        let p2 = if rng.gen_bool(0.3) {
            corpus::make_partial(&m2, &mut rng, 0.0)
        } else {
            corpus::make_partial(&m2, &mut rng, 0.15)
        };
        let v = match decide_partial(&mut s, (&p1, &a), (&p2, &a2), DecideOptions::default()) {
            Ok(v) => v,
            Err(e) => {
                problems.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let at4 =
            oracle_decide_partial(&mut s, (&p1, &a), (&p2, &a2), unbounded(4)).counterexample();
        match (v.equivalent, at4) {
            (true, None) | (false, Some(_)) => agree += 1,
            (true, Some(t)) => {
                problems.push(format!("case {case}: oracle differs on {}", s.render(t)))
            }
            (false, None) => {
                let budget = EnumBudget {
                    max_height: 8,
                    max_count: 20_000_000,
                };
                if oracle_decide_partial(&mut s, (&p1, &a), (&p2, &a2), budget)
                    .counterexample()
                    .is_some()
                {
                    deeper += 1;
                } else {
                    problems.push(format!(
                        "case {case}: inequivalent but no witness up to height 8"
                    ));
                }
            }
        }
    }
    let pipeline_ok = problems.is_empty();
    let mut detail = format!(
        "{domain_detail}; random partial pairs: {agree} agree at height 4, {deeper} confirmed deeper, {} problems",
        problems.len()
    );
    for p in problems.iter().take(3) {
        detail.push_str(&format!("; {p}"));
    }
    Outcome::new(cmp.equivalent && pipeline_ok, detail)
}

const INVERSE_DEWEY: &str = "sigma { f/2 a/0 }\ndelta_o { f/2 a/1 }\ndelta_i { 1/1 2/1 e/0 }\n\
    params 1\nstate q\n\
    rule q(f(x1,x2), y1) = f(q(x1, 1(y1)), q(x2, 2(y1)))\n\
    rule q(a, y1) = a(y1)\naxiom = q(x1, e)\n";

fn inverse_dewey() -> Outcome {
    let mut s = TermStore::new();
    let (m, a, _) = load(&mut s, INVERSE_DEWEY);
    let t = parse_tree(&mut s, &m.sigma, SymbolClass::Input, "f(f(a,a),a)").unwrap();
    let out = evaluate_axiom(&mut s, &m, &a, t).map(|o| s.render(o));
    let expected = "f(f(a(1(1(e))),a(2(1(e)))),a(2(e)))";
    let renamed = INVERSE_DEWEY
        .replace("q(", "walk(")
        .replace("state q", "state walk");
    let (m2, a2, _) = load(&mut s, &renamed);
    let d = Dta::trivial(&s, &m.sigma);
    let v =
        decide(&mut s, (&m, &a), (&m2, &a2), &d, DecideOptions::default()).map(|v| v.equivalent);
    let output_ok = out.as_deref() == Ok(expected);
    Outcome::new(
        output_ok && v == Ok(true),
        format!(
            "output {:?}, renamed copy equivalent: {:?}",
            out,
            v.map_err(|e| e.to_string())
        ),
    )
}
