//! Equivalence of earliest transducers via Herbrand conjunctions.
//!
//! For every state `q` a conjunction `Ψ_q(z)` describes when `q` behaves like
//! the fixed output `z`, and for every pair `(q, q')` over the same automaton
//! state a conjunction `Φ_(q,q')` describes the parameter values under which
//! both states agree. Both families are computed round by round until a round
//! reproduces the previous one.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::earliest::{earliest_transform, EarliestError};
use crate::herbrand::{conj_all, eval_ground, reduce, subst, Conjunction};
use crate::model::{
    dta_analyze, product_annotate, rhs_decompose, validate, validate_axiom, Axiom, Dta, EvalError,
    Evaluator, Leaf, Mode, ModelError, Mtt, StateId, StateMap,
};
use crate::oracle::{oracle_decide, EnumBudget};
use crate::terms::{Pattern, SymId, TermId, TermStore, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecideError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Earliest(#[from] EarliestError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("the transducers read different input alphabets")]
    AlphabetMismatch,
    #[error("{0}")]
    Internal(String),
    #[error("conjunctions did not stabilize within {bound} rounds")]
    BoundExceeded { bound: usize },
}

/// Aligned leaf of a rule right-hand side, with parameters already renamed
/// to the side's variables.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Slot {
    Param(Var),
    Call {
        state: StateId,
        child: usize,
        args: Vec<TermId>,
    },
}

#[derive(Debug, Clone)]
struct Shape {
    symbol: SymId,
    pattern: Pattern,
    slots: Vec<Slot>,
}

/// A D-earliest transducer prepared for the conjunction rounds.
#[derive(Debug, Clone)]
pub struct Side {
    pub mtt: Mtt,
    pub pi: StateMap,
    pub primed: bool,
    /// Per state, one shape per automaton transition from its automaton state.
    shapes: Vec<Vec<Shape>>,
}

impl Side {
    /// `primed` selects the variables `y'_j` instead of `y_j`.
    pub fn new(store: &mut TermStore, mtt: Mtt, pi: StateMap, d: &Dta, primed: bool) -> Side {
        let renaming = store.param_vars(mtt.params, primed);
        let mut shapes = Vec::with_capacity(mtt.states.len());
        for q in mtt.state_ids() {
            let mut per = Vec::new();
            for (f, _) in d.transitions_from(pi.get(q)) {
                let Some(rhs) = mtt.rule(q, f) else { continue };
                let (pattern, leaves) = rhs_decompose(store, rhs);
                let slots = leaves
                    .into_iter()
                    .map(|l| match l {
                        Leaf::Param(j) => Slot::Param(Var::param(j, primed)),
                        Leaf::Call(c) => Slot::Call {
                            state: c.state,
                            child: c.child,
                            args: c
                                .args
                                .iter()
                                .map(|&a| {
                                    if primed {
                                        store.instantiate_params(a, &renaming, false)
                                    } else {
                                        a
                                    }
                                })
                                .collect(),
                        },
                    })
                    .collect();
                per.push(Shape {
                    symbol: f,
                    pattern,
                    slots,
                });
            }
            shapes.push(per);
        }
        Side {
            mtt,
            pi,
            primed,
            shapes,
        }
    }

    fn args_map(&self, args: &[TermId]) -> HashMap<Var, TermId> {
        args.iter()
            .enumerate()
            .map(|(j, &t)| (Var::param(j + 1, self.primed), t))
            .collect()
    }
}

/// `Ψ_q` per state of one side.
pub type PsiTable = BTreeMap<StateId, Conjunction>;
/// `Φ_(q,q')` per state pair.
pub type PhiTable = BTreeMap<(StateId, StateId), Conjunction>;

/// One round of `Ψ` for the given states; `prev` is `None` in round 0.
pub fn psi_step(
    store: &mut TermStore,
    side: &Side,
    prev: Option<&PsiTable>,
    keys: &[StateId],
) -> PsiTable {
    let mut out = BTreeMap::new();
    let z = store.var(Var::Z);
    let top = store.top_pattern();
    for &q in keys {
        let mut parts = Vec::new();
        'rules: for shape in &side.shapes[q.index()] {
            if shape.pattern != top {
                parts.clear();
                parts.push(Conjunction::False);
                break 'rules;
            }
            match &shape.slots[0] {
                Slot::Param(v) => {
                    let vt = store.var(*v);
                    parts.push(reduce(store, &[(z, vt)]));
                }
                Slot::Call { state, args, .. } => {
                    if let Some(prev) = prev {
                        let map = side.args_map(args);
                        parts.push(subst(store, &prev[state], &map));
                    }
                }
            }
        }
        out.insert(q, conj_all(store, &parts));
    }
    out
}

/// `s_q`: the output of `q` on the witness of its automaton state, with the
/// formal parameters left as variables.
#[derive(Debug, Clone, Default)]
pub struct Witnesses {
    pub outputs: BTreeMap<StateId, TermId>,
}

impl Witnesses {
    pub fn compute(
        store: &mut TermStore,
        side: &Side,
        d: &Dta,
        keys: &[StateId],
    ) -> Result<Witnesses, DecideError> {
        let params = store.param_vars(side.mtt.params, side.primed);
        let mut eval = Evaluator::new(&side.mtt);
        let mut outputs = BTreeMap::new();
        for &q in keys {
            let b = side.pi.get(q);
            let w = d
                .witness(b)
                .ok_or_else(|| EarliestError::MissingWitness(d.states[b.index()].clone()))?;
            outputs.insert(q, eval.state(store, q, w, &params)?);
        }
        Ok(Witnesses { outputs })
    }
}

/// Everything one round of `Φ` reads from the previous round.
pub struct Previous<'a> {
    pub psi: &'a PsiTable,
    pub psi2: &'a PsiTable,
    pub phi: &'a PhiTable,
}

/// One round of `Φ` for the given pairs; `prev` is `None` in round 0.
pub fn phi_step(
    store: &mut TermStore,
    left: &Side,
    right: &Side,
    s: &Witnesses,
    prev: Option<Previous>,
    keys: &[(StateId, StateId)],
) -> PhiTable {
    let mut out = BTreeMap::new();
    let z = Var::Z;
    for &(q, q2) in keys {
        let mut parts = Vec::new();
        for (a, b) in left.shapes[q.index()].iter().zip(&right.shapes[q2.index()]) {
            debug_assert_eq!(a.symbol, b.symbol);
            if a.pattern != b.pattern {
                parts.clear();
                parts.push(Conjunction::False);
                break;
            }
            for (t, t2) in a.slots.iter().zip(&b.slots) {
                match (t, t2) {
                    (Slot::Param(v), Slot::Param(v2)) => {
                        let (l, r) = (store.var(*v), store.var(*v2));
                        parts.push(reduce(store, &[(l, r)]));
                    }
                    (Slot::Param(v), Slot::Call { state, args, .. }) => {
                        if let Some(p) = &prev {
                            let mut map = right.args_map(args);
                            map.insert(z, store.var(*v));
                            parts.push(subst(store, &p.psi2[state], &map));
                        }
                    }
                    (Slot::Call { state, args, .. }, Slot::Param(v2)) => {
                        if let Some(p) = &prev {
                            let mut map = left.args_map(args);
                            map.insert(z, store.var(*v2));
                            parts.push(subst(store, &p.psi[state], &map));
                        }
                    }
                    (
                        Slot::Call { state, child, args },
                        Slot::Call {
                            state: state2,
                            child: child2,
                            args: args2,
                        },
                    ) => {
                        let Some(p) = &prev else { continue };
                        if child == child2 {
                            let mut map = left.args_map(args);
                            map.extend(right.args_map(args2));
                            parts.push(subst(store, &p.phi[&(*state, *state2)], &map));
                        } else {
                            let mut map = left.args_map(args);
                            let value = store.substitute(s.outputs[state], &map);
                            map.insert(z, value);
                            parts.push(subst(store, &p.psi[state], &map));
                            let mut map2 = right.args_map(args2);
                            map2.insert(z, value);
                            parts.push(subst(store, &p.psi2[state2], &map2));
                        }
                    }
                }
            }
        }
        out.insert((q, q2), conj_all(store, &parts));
    }
    out
}

/// The tables of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub psi: PsiTable,
    pub psi2: PsiTable,
    pub phi: PhiTable,
}

/// Result of iterating the rounds to a fixpoint.
#[derive(Debug, Clone)]
pub struct Stabilized {
    /// Every computed round; the last one equals the one before it.
    pub rounds: Vec<Round>,
    /// First round that the next round reproduces.
    pub stable_at: usize,
    /// First round from which both `Ψ` tables no longer change.
    pub psi_stable_at: usize,
    /// Allowed number of rounds.
    pub bound: usize,
}

impl Stabilized {
    pub fn last(&self) -> &Round {
        self.rounds.last().expect("at least one round")
    }
}

/// Which entries [`stabilize`] computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    /// Entries reachable from the given pairs.
    Demand,
    /// Every state and every pair over the same automaton state.
    Full,
}

/// Number of rounds after which `Φ` must have stabilized.
pub fn round_bound(left: &Side, right: &Side) -> usize {
    let n = left.mtt.states.len().max(right.mtt.states.len());
    let l = left.mtt.params.max(right.mtt.params);
    n * n * (2 * l + 1)
}

#[derive(Default)]
struct Demand {
    psi: BTreeSet<StateId>,
    psi2: BTreeSet<StateId>,
    phi: BTreeSet<(StateId, StateId)>,
    s: BTreeSet<StateId>,
}

fn demand(left: &Side, right: &Side, roots: &[(StateId, StateId)]) -> Demand {
    let mut need = Demand::default();
    let mut work: Vec<(StateId, StateId)> = Vec::new();
    for &r in roots {
        if need.phi.insert(r) {
            work.push(r);
        }
    }
    let mut psi_work: Vec<StateId> = Vec::new();
    let mut psi2_work: Vec<StateId> = Vec::new();
    while let Some((q, q2)) = work.pop() {
        for (a, b) in left.shapes[q.index()].iter().zip(&right.shapes[q2.index()]) {
            if a.pattern != b.pattern {
                continue;
            }
            for (t, t2) in a.slots.iter().zip(&b.slots) {
                match (t, t2) {
                    (Slot::Param(_), Slot::Param(_)) => {}
                    (Slot::Param(_), Slot::Call { state, .. }) => psi2_work.push(*state),
                    (Slot::Call { state, .. }, Slot::Param(_)) => psi_work.push(*state),
                    (
                        Slot::Call { state, child, .. },
                        Slot::Call {
                            state: state2,
                            child: child2,
                            ..
                        },
                    ) => {
                        if child == child2 {
                            if need.phi.insert((*state, *state2)) {
                                work.push((*state, *state2));
                            }
                        } else {
                            need.s.insert(*state);
                            psi_work.push(*state);
                            psi2_work.push(*state2);
                        }
                    }
                }
            }
        }
    }
    for (side, work, set) in [
        (left, psi_work, &mut need.psi),
        (right, psi2_work, &mut need.psi2),
    ] {
        let mut work = work;
        while let Some(q) = work.pop() {
            if !set.insert(q) {
                continue;
            }
            for shape in &side.shapes[q.index()] {
                for slot in &shape.slots {
                    if let Slot::Call { state, .. } = slot {
                        work.push(*state);
                    }
                }
            }
        }
    }
    need
}

/// Iterates `Ψ`, `Ψ'` and `Φ` jointly until a round reproduces its
/// predecessor. Fails when that takes more than [`round_bound`] rounds.
pub fn stabilize(
    store: &mut TermStore,
    left: &Side,
    right: &Side,
    d: &Dta,
    roots: &[(StateId, StateId)],
    coverage: Coverage,
) -> Result<Stabilized, DecideError> {
    let need = match coverage {
        Coverage::Demand => demand(left, right, roots),
        Coverage::Full => {
            let mut need = Demand {
                psi: left.mtt.state_ids().collect(),
                psi2: right.mtt.state_ids().collect(),
                s: left.mtt.state_ids().collect(),
                ..Demand::default()
            };
            for q in left.mtt.state_ids() {
                for q2 in right.mtt.state_ids() {
                    if left.pi.get(q) == right.pi.get(q2) {
                        need.phi.insert((q, q2));
                    }
                }
            }
            need.phi.extend(roots.iter().copied());
            need
        }
    };
    let psi_keys: Vec<StateId> = need.psi.iter().copied().collect();
    let psi2_keys: Vec<StateId> = need.psi2.iter().copied().collect();
    let phi_keys: Vec<(StateId, StateId)> = need.phi.iter().copied().collect();
    let s_keys: Vec<StateId> = need.s.iter().copied().collect();
    let s = Witnesses::compute(store, left, d, &s_keys)?;
    let bound = round_bound(left, right);

    let first = Round {
        psi: psi_step(store, left, None, &psi_keys),
        psi2: psi_step(store, right, None, &psi2_keys),
        phi: phi_step(store, left, right, &s, None, &phi_keys),
    };
    let mut rounds = vec![first];
    let mut psi_stable_at = None;
    loop {
        let h = rounds.len();
        let prev = &rounds[h - 1];
        let next = Round {
            psi: psi_step(store, left, Some(&prev.psi), &psi_keys),
            psi2: psi_step(store, right, Some(&prev.psi2), &psi2_keys),
            phi: phi_step(
                store,
                left,
                right,
                &s,
                Some(Previous {
                    psi: &prev.psi,
                    psi2: &prev.psi2,
                    phi: &prev.phi,
                }),
                &phi_keys,
            ),
        };
        if psi_stable_at.is_none() && next.psi == prev.psi && next.psi2 == prev.psi2 {
            psi_stable_at = Some(h - 1);
        }
        let done = next == *prev;
        rounds.push(next);
        if done {
            return Ok(Stabilized {
                rounds,
                stable_at: h - 1,
                psi_stable_at: psi_stable_at.unwrap_or(h - 1),
                bound,
            });
        }
        if h > bound {
            return Err(DecideError::BoundExceeded { bound });
        }
    }
}

/// A transducer with axiom, brought into D-earliest form.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub mtt: Mtt,
    pub axiom: Axiom,
    pub pi: StateMap,
}

/// Validates, annotates with `d` and applies the earliest transformation.
/// `d` must already be analyzed.
pub fn normalize(
    store: &mut TermStore,
    m: &Mtt,
    a: &Axiom,
    d: &Dta,
) -> Result<Normalized, DecideError> {
    let mut report = validate(store, m, Mode::Partial);
    report.issues.extend(validate_axiom(store, m, a).issues);
    if !report.is_ok() {
        return Err(ModelError::Invalid(report).into());
    }
    let (pm, pa, pi) = product_annotate(store, m, a, d, Mode::Total)?;
    let (mtt, axiom, pi, _) = earliest_transform(store, &pm, &pa, &pi, d)?;
    Ok(Normalized { mtt, axiom, pi })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Reason {
    /// The earliest axioms emit different output tops.
    AxiomPattern { left: String, right: String },
    /// The earliest axioms have different numbers of calls.
    CallCount { left: usize, right: usize },
    /// The transducers are defined on different inputs.
    Domain { witness: String },
    /// The condition of an aligned axiom call pair fails on its arguments.
    PairCondition {
        index: usize,
        left_state: String,
        right_state: String,
        condition: String,
    },
}

/// Per axiom call pair, for `--explain`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairReport {
    pub left_state: String,
    pub right_state: String,
    pub left_args: Vec<String>,
    pub right_args: Vec<String>,
    pub condition: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub equivalent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<Reason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
    #[serde(skip)]
    pub counterexample_tree: Option<TermId>,
    /// Round at which the conjunctions stabilized, if they were computed.
    pub rounds: Option<usize>,
    pub bound: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecideOptions {
    pub coverage: Coverage,
    /// Height cap of the counterexample search; `None` skips the search.
    pub search_cap: Option<usize>,
    /// Cap on the number of inputs the search visits.
    pub search_count: usize,
    pub explain: bool,
}

impl Default for DecideOptions {
    fn default() -> Self {
        DecideOptions {
            coverage: Coverage::Demand,
            search_cap: Some(6),
            search_count: 200_000,
            explain: false,
        }
    }
}

/// Decides whether two total transducers agree on every input accepted by
/// `d` (raw or analyzed).
pub fn decide(
    store: &mut TermStore,
    first: (&Mtt, &Axiom),
    second: (&Mtt, &Axiom),
    d: &Dta,
    opts: DecideOptions,
) -> Result<Verdict, DecideError> {
    let mut s1 = first.0.sigma.clone();
    let mut s2 = second.0.sigma.clone();
    s1.sort();
    s2.sort();
    if s1 != s2 {
        return Err(DecideError::AlphabetMismatch);
    }
    let d = dta_analyze(store, d)?;
    let n1 = normalize(store, first.0, first.1, &d)?;
    let n2 = normalize(store, second.0, second.1, &d)?;
    let mut verdict = compare(store, &n1, &n2, &d, opts)?;
    if !verdict.equivalent {
        if let Some(cap) = opts.search_cap {
            let budget = EnumBudget {
                max_height: cap,
                max_count: opts.search_count,
            };
            if let Some(t) = oracle_decide(store, first, second, Some(&d), budget)?.counterexample()
            {
                verdict.counterexample = Some(store.render(t));
                verdict.counterexample_tree = Some(t);
            }
        }
    }
    Ok(verdict)
}

/// The symbolic part of [`decide`] on normalized transducers.
pub fn compare(
    store: &mut TermStore,
    n1: &Normalized,
    n2: &Normalized,
    d: &Dta,
    opts: DecideOptions,
) -> Result<Verdict, DecideError> {
    let mut verdict = Verdict {
        equivalent: false,
        reason: None,
        counterexample: None,
        counterexample_tree: None,
        rounds: None,
        bound: None,
        pairs: Vec::new(),
    };
    if n1.axiom.pattern != n2.axiom.pattern {
        verdict.reason = Some(Reason::AxiomPattern {
            left: store.render(n1.axiom.pattern),
            right: store.render(n2.axiom.pattern),
        });
        return Ok(verdict);
    }
    if n1.axiom.calls.len() != n2.axiom.calls.len() {
        verdict.reason = Some(Reason::CallCount {
            left: n1.axiom.calls.len(),
            right: n2.axiom.calls.len(),
        });
        return Ok(verdict);
    }
    let left = Side::new(store, n1.mtt.clone(), n1.pi.clone(), d, false);
    let right = Side::new(store, n2.mtt.clone(), n2.pi.clone(), d, true);
    let roots: Vec<(StateId, StateId)> = n1
        .axiom
        .calls
        .iter()
        .zip(&n2.axiom.calls)
        .map(|(c, c2)| (c.state, c2.state))
        .collect();
    let st = stabilize(store, &left, &right, d, &roots, opts.coverage)?;
    verdict.rounds = Some(st.stable_at);
    verdict.bound = Some(st.bound);
    let phi = &st.last().phi;
    verdict.equivalent = true;
    for (i, (c, c2)) in n1.axiom.calls.iter().zip(&n2.axiom.calls).enumerate() {
        let cond = &phi[&(c.state, c2.state)];
        let mut assignment = left.args_map(&c.args);
        assignment.extend(right.args_map(&c2.args));
        let holds =
            eval_ground(store, cond, &assignment).expect("axiom arguments cover every parameter");
        let report = PairReport {
            left_state: n1.mtt.state_name(c.state).to_string(),
            right_state: n2.mtt.state_name(c2.state).to_string(),
            left_args: c.args.iter().map(|&t| store.render(t)).collect(),
            right_args: c2.args.iter().map(|&t| store.render(t)).collect(),
            condition: cond.render(store),
            holds,
        };
        if !holds && verdict.equivalent {
            verdict.equivalent = false;
            verdict.reason = Some(Reason::PairCondition {
                index: i + 1,
                left_state: report.left_state.clone(),
                right_state: report.right_state.clone(),
                condition: report.condition.clone(),
            });
        }
        if opts.explain {
            verdict.pairs.push(report);
        }
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_spec;

    fn prepared(s: &mut TermStore, text: &str, primed: bool) -> (Side, Dta, Axiom) {
        let spec = parse_spec(s, text).unwrap();
        let m = spec.mtt.unwrap();
        let a = spec.axiom.unwrap();
        let raw = spec.dta.unwrap_or_else(|| Dta::trivial(s, &m.sigma));
        let d = dta_analyze(s, &raw).unwrap();
        let (pm, pa, pi) = product_annotate(s, &m, &a, &d, Mode::Total).unwrap();
        (Side::new(s, pm, pi, &d, primed), d, pa)
    }

    fn conj(s: &mut TermStore, eqs: &[(Var, &str)]) -> Conjunction {
        let pairs: Vec<(TermId, TermId)> = eqs
            .iter()
            .map(|&(v, t)| {
                let l = s.var(v);
                let r = parse_param(s, t);
                (l, r)
            })
            .collect();
        reduce(s, &pairs)
    }

    fn parse_param(s: &mut TermStore, t: &str) -> TermId {
        match t {
            "z" => s.var(Var::Z),
            "y1" => s.var(Var::Y(1)),
            "y2" => s.var(Var::Y(2)),
            "y1'" => s.var(Var::YPrime(1)),
            "y2'" => s.var(Var::YPrime(2)),
            "b" => {
                let b = s.lookup(crate::terms::SymbolClass::Inner, "b").unwrap();
                s.app(b, &[])
            }
            _ => {
                let (head, rest) = t.split_once('(').unwrap();
                let inner = parse_param(s, rest.trim_end_matches(')'));
                let h = s.lookup(crate::terms::SymbolClass::Inner, head).unwrap();
                s.app(h, &[inner])
            }
        }
    }

    const PSI: &str = "sigma { a/0 f/1 }\ndelta_o { }\ndelta_i { h/1 b/0 }\nparams 2\nstate q\n\
        rule q(a, y1, y2) = y1\nrule q(f(x1), y1, y2) = q(x1, h(y2), b)\naxiom = q(x1, b, b)\n";

    #[test]
    fn psi_rounds_match_the_worked_values() {
        let mut s = TermStore::new();
        let (side, _, _) = prepared(&mut s, PSI, false);
        let q = StateId(0);
        let r0 = psi_step(&mut s, &side, None, &[q]);
        let r1 = psi_step(&mut s, &side, Some(&r0), &[q]);
        let r2 = psi_step(&mut s, &side, Some(&r1), &[q]);
        let r3 = psi_step(&mut s, &side, Some(&r2), &[q]);
        let z = Var::Z;
        assert_eq!(r0[&q], conj(&mut s, &[(z, "y1")]));
        assert_eq!(r1[&q], conj(&mut s, &[(z, "y1"), (z, "h(y2)")]));
        let want = conj(
            &mut s,
            &[(Var::Y(2), "b"), (Var::Y(1), "h(b)"), (z, "h(b)")],
        );
        assert_eq!(r2[&q], want);
        assert_eq!(r3[&q], want);
        assert_eq!(want.render(&s), "$z = h(b) & y1 = h(b) & y2 = b");
    }

    #[test]
    fn non_top_pattern_makes_psi_false() {
        let mut s = TermStore::new();
        let text = "sigma { a/0 }\ndelta_o { g/1 }\ndelta_i { c/0 }\nparams 1\nstate q\n\
            rule q(a, y1) = g(y1)\naxiom = q(x1, c)\n";
        let (side, _, _) = prepared(&mut s, text, false);
        let r0 = psi_step(&mut s, &side, None, &[StateId(0)]);
        assert!(r0[&StateId(0)].is_false());
        let r1 = psi_step(&mut s, &side, Some(&r0), &[StateId(0)]);
        assert!(r1[&StateId(0)].is_false());
    }

    const PHI_LEFT: &str = "sigma { f/1 g/0 h/0 }\ndelta_o { a/2 d/0 }\ndelta_i { b/2 c/1 z/0 }\n\
        params 2\nstate q\n\
        rule q(f(x1), y1, y2) = a(q(x1, b(y1,y1), c(y2)), d)\n\
        rule q(g, y1, y2) = y1\nrule q(h, y1, y2) = y2\naxiom = q(x1, c(z), z)\n\
        dta { states b; init b; trans b(f) -> (b); trans b(g) -> (); trans b(h) -> (); }\n";
    const PHI_RIGHT: &str = "sigma { f/1 g/0 h/0 }\ndelta_o { a/2 d/0 }\ndelta_i { b/2 c/1 z/0 }\n\
        params 2\nstate q'\n\
        rule q'(f(x1), y1, y2) = a(q'(x1, c(y1), b(y2,y2)), d)\n\
        rule q'(g, y1, y2) = y2\nrule q'(h, y1, y2) = y1\naxiom = q'(x1, z, c(z))\n";

    #[test]
    fn phi_rounds_match_the_worked_values() {
        let mut s = TermStore::new();
        let (left, d, _) = prepared(&mut s, PHI_LEFT, false);
        let spec = parse_spec(&mut s, PHI_RIGHT).unwrap();
        let (m2, a2) = (spec.mtt.unwrap(), spec.axiom.unwrap());
        let (pm, _, pi) = product_annotate(&s, &m2, &a2, &d, Mode::Total).unwrap();
        let right = Side::new(&mut s, pm, pi, &d, true);
        let st = stabilize(
            &mut s,
            &left,
            &right,
            &d,
            &[(StateId(0), StateId(0))],
            Coverage::Full,
        )
        .unwrap();
        let key = (StateId(0), StateId(0));
        let y1 = s.var(Var::Y(1));
        let y2 = s.var(Var::Y(2));
        let y1p = s.var(Var::YPrime(1));
        let y2p = s.var(Var::YPrime(2));
        let want = reduce(&mut s, &[(y1, y2p), (y2, y1p)]);
        assert_eq!(st.rounds[0].phi[&key], want);
        assert_eq!(st.rounds[1].phi[&key], want);
        assert_eq!(st.stable_at, 0);
    }
}
