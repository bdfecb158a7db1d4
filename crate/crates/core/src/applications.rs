//! Partial transducers, automaton equivalence and regular look-ahead.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::equiv::{decide, DecideError, DecideOptions, Reason, Verdict};
use crate::model::{dta_analyze, Axiom, DState, Dta, ModelError, Mtt, Rhs, StateId};
use crate::terms::{SymId, SymbolClass, TermError, TermId, TermStore};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AppError {
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("look-ahead automaton has no transition for `{symbol}` on ({states})")]
    MissingLookahead { symbol: String, states: String },
    #[error("state `{state}` has no rule for `{symbol}` with guard <{guard}>")]
    MissingGuardedRule {
        state: String,
        symbol: String,
        guard: String,
    },
    #[error("state `{state}` has two rules for `{symbol}` with guard <{guard}>")]
    DuplicateGuardedRule {
        state: String,
        symbol: String,
        guard: String,
    },
    #[error("the two transducers use different input alphabets")]
    AlphabetMismatch,
}

/// Adds `q(f(…), …) → bottom` for every missing `(q, f)`.
pub fn totalize(store: &mut TermStore, m: &Mtt, bottom: &str) -> Result<Mtt, AppError> {
    let bot = store.symbol(bottom, 0, SymbolClass::Output)?;
    let mut out = m.clone();
    if !out.delta_o.contains(&bot) {
        out.delta_o.push(bot);
    }
    for q in m.state_ids() {
        for &f in &m.sigma {
            if m.rule(q, f).is_none() {
                out.add_rule(q, f, Rhs::Out(bot, Vec::new()));
            }
        }
    }
    Ok(out)
}

/// A rank-0 state-output symbol name not yet used by either transducer.
pub fn fresh_bottom_name(store: &TermStore, ms: &[&Mtt]) -> String {
    let mut name = "bot".to_string();
    loop {
        let taken = store
            .lookup(SymbolClass::Output, &name)
            .is_some_and(|s| store.sym(s).rank != 0 || ms.iter().any(|m| m.delta_o.contains(&s)));
        if !taken {
            return name;
        }
        name.push('\'');
    }
}

/// The automaton accepting exactly the inputs on which `(m, a)` is defined.
///
/// States are sets of transducer states that must all have a rule for the
/// next symbol; the empty set accepts everything. Parameter arguments never
/// contain calls, so they cannot fail and do not constrain the domain.
pub fn domain_dta(store: &TermStore, m: &Mtt, a: &Axiom) -> Dta {
    let init: BTreeSet<StateId> = a.calls.iter().map(|c| c.state).collect();
    let mut ids: HashMap<BTreeSet<StateId>, DState> = HashMap::new();
    let mut sets: Vec<BTreeSet<StateId>> = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern =
        |s: BTreeSet<StateId>, sets: &mut Vec<BTreeSet<StateId>>, queue: &mut VecDeque<DState>| {
            *ids.entry(s.clone()).or_insert_with(|| {
                sets.push(s);
                let id = DState(sets.len() as u32 - 1);
                queue.push_back(id);
                id
            })
        };
    let b0 = intern(init, &mut sets, &mut queue);
    let mut trans = BTreeMap::new();
    while let Some(b) = queue.pop_front() {
        let set = sets[b.index()].clone();
        for &f in &m.sigma {
            let k = store.sym(f).rank;
            if set.iter().any(|&q| m.rule(q, f).is_none()) {
                continue;
            }
            let mut kids = vec![BTreeSet::new(); k];
            for &q in &set {
                for c in m.rule(q, f).expect("checked above").calls() {
                    kids[c.child - 1].insert(c.state);
                }
            }
            let kids: Vec<DState> = kids
                .into_iter()
                .map(|s| intern(s, &mut sets, &mut queue))
                .collect();
            trans.insert((b, f), kids);
        }
    }
    let states = sets
        .iter()
        .map(|s| {
            let names: Vec<&str> = s.iter().map(|&q| m.state_name(q)).collect();
            format!("{{{}}}", names.join(","))
        })
        .collect();
    Dta {
        states,
        sigma: m.sigma.clone(),
        init: b0,
        trans,
        witnesses: Vec::new(),
    }
}

/// Equivalence of partial transducers: equal domains, and equal outputs on
/// the common domain after totalizing both with a shared fresh symbol.
pub fn decide_partial(
    store: &mut TermStore,
    first: (&Mtt, &Axiom),
    second: (&Mtt, &Axiom),
    opts: DecideOptions,
) -> Result<Verdict, DecideError> {
    let raw1 = domain_dta(store, first.0, first.1);
    let raw2 = domain_dta(store, second.0, second.1);
    let d1 = nonempty(dta_analyze(store, &raw1))?;
    let d2 = nonempty(dta_analyze(store, &raw2))?;
    let mut verdict = Verdict {
        equivalent: false,
        reason: None,
        counterexample: None,
        counterexample_tree: None,
        rounds: None,
        bound: None,
        pairs: Vec::new(),
    };
    let witness = match (&d1, &d2) {
        (None, None) => {
            verdict.equivalent = true;
            return Ok(verdict);
        }
        (Some(d), None) | (None, Some(d)) => d.witness(d.init),
        (Some(d1), Some(d2)) => dta_equiv(store, d1, d2).witness,
    };
    if let Some(t) = witness {
        let shown = store.render(t);
        verdict.reason = Some(Reason::Domain {
            witness: shown.clone(),
        });
        verdict.counterexample = Some(shown);
        verdict.counterexample_tree = Some(t);
        return Ok(verdict);
    }
    let bottom = fresh_bottom_name(store, &[first.0, second.0]);
    let t1 = totalize(store, first.0, &bottom).map_err(|e| DecideError::Internal(e.to_string()))?;
    let t2 =
        totalize(store, second.0, &bottom).map_err(|e| DecideError::Internal(e.to_string()))?;
    decide(store, (&t1, first.1), (&t2, second.1), &raw1, opts)
}

fn nonempty(r: Result<Dta, ModelError>) -> Result<Option<Dta>, DecideError> {
    match r {
        Ok(d) => Ok(Some(d)),
        Err(ModelError::EmptyDomain) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DtaComparison {
    pub equivalent: bool,
    /// A tree accepted by exactly one of the automata.
    pub witness: Option<TermId>,
}

/// Language equivalence of two analyzed automata by product reachability.
pub fn dta_equiv(store: &mut TermStore, d1: &Dta, d2: &Dta) -> DtaComparison {
    let mut symbols: Vec<SymId> = d1.sigma.iter().chain(&d2.sigma).copied().collect();
    symbols.sort_by(|&a, &b| store.sym_name(a).cmp(store.sym_name(b)).then(a.cmp(&b)));
    symbols.dedup();
    type Pair = (DState, DState);
    // parent pair, symbol, child index
    let mut parent: HashMap<Pair, Option<(Pair, SymId, usize)>> = HashMap::new();
    let start = (d1.init, d2.init);
    parent.insert(start, None);
    let mut queue = VecDeque::from([start]);
    while let Some((x, y)) = queue.pop_front() {
        for &f in &symbols {
            let t1 = d1.trans.get(&(x, f));
            let t2 = d2.trans.get(&(y, f));
            match (t1, t2) {
                (Some(k1), Some(k2)) => {
                    for (i, (&c1, &c2)) in k1.iter().zip(k2).enumerate() {
                        if let std::collections::hash_map::Entry::Vacant(e) = parent.entry((c1, c2))
                        {
                            e.insert(Some(((x, y), f, i)));
                            queue.push_back((c1, c2));
                        }
                    }
                }
                (None, None) => {}
                (one, _) => {
                    let (d, kids, left) = match one {
                        Some(k) => (d1, k.clone(), true),
                        None => (d2, t2.expect("one side defined").clone(), false),
                    };
                    let subs: Vec<TermId> = kids
                        .iter()
                        .map(|&k| d.witness(k).expect("analyzed automaton"))
                        .collect();
                    let mut w = store.app(f, &subs);
                    let mut cur = (x, y);
                    while let Some(&Some((up, g, i))) = parent.get(&cur) {
                        let sibs: Vec<DState> = if left {
                            d1.trans[&(up.0, g)].clone()
                        } else {
                            d2.trans[&(up.1, g)].clone()
                        };
                        let kids: Vec<TermId> = sibs
                            .iter()
                            .enumerate()
                            .map(|(j, &s)| {
                                if j == i {
                                    w
                                } else {
                                    d.witness(s).expect("analyzed")
                                }
                            })
                            .collect();
                        w = store.app(g, &kids);
                        cur = up;
                    }
                    return DtaComparison {
                        equivalent: false,
                        witness: Some(w),
                    };
                }
            }
        }
    }
    DtaComparison {
        equivalent: true,
        witness: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LaState(pub u32);

impl LaState {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuardedRule {
    pub state: StateId,
    pub symbol: SymId,
    pub guard: Vec<LaState>,
    pub rhs: Rhs,
}

/// A transducer whose rules are selected by a bottom-up automaton run on the
/// children of the current node.
#[derive(Debug, Clone, Default)]
pub struct LookaheadMtt {
    /// States, alphabets and parameter count; its own rule list is unused.
    pub base: Mtt,
    pub la_states: Vec<String>,
    pub la_trans: BTreeMap<(SymId, Vec<LaState>), LaState>,
    pub rules: Vec<GuardedRule>,
}

impl LookaheadMtt {
    pub fn rule(&self, q: StateId, f: SymId, guard: &[LaState]) -> Option<&Rhs> {
        self.rules
            .iter()
            .find(|r| r.state == q && r.symbol == f && r.guard == guard)
            .map(|r| &r.rhs)
    }

    /// Look-ahead state of a tree.
    pub fn classify(
        &self,
        store: &TermStore,
        t: TermId,
        memo: &mut HashMap<TermId, LaState>,
    ) -> Option<LaState> {
        if let Some(&r) = memo.get(&t) {
            return Some(r);
        }
        let kids: Option<Vec<LaState>> = store
            .children(t)
            .iter()
            .map(|&c| self.classify(store, c, memo))
            .collect();
        let r = *self.la_trans.get(&(store.head(t), kids?))?;
        memo.insert(t, r);
        Some(r)
    }

    fn guard_names(&self, g: &[LaState]) -> String {
        g.iter()
            .map(|r| self.la_states[r.index()].as_str())
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn tuples(n: usize, k: usize) -> Vec<Vec<LaState>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..n as u32).map(move |r| {
                    let mut w = v.clone();
                    w.push(LaState(r));
                    w
                })
            })
            .collect();
    }
    out
}

/// Name of the input symbol `f` annotated with both look-ahead vectors.
pub fn annotated_name(
    n1: &LookaheadMtt,
    n2: &LookaheadMtt,
    f: &str,
    g1: &[LaState],
    g2: &[LaState],
) -> String {
    format!("{f}<{}|{}>", n1.guard_names(g1), n2.guard_names(g2))
}

/// Result of removing look-ahead from a pair of transducers.
#[derive(Debug, Clone)]
pub struct LookaheadFree {
    pub first: Mtt,
    pub second: Mtt,
    /// Accepts annotated trees that encode correct runs of both automata.
    pub runs: Dta,
    /// `(f, guard1, guard2) ↦ annotated symbol`.
    pub symbols: HashMap<(SymId, Vec<LaState>, Vec<LaState>), SymId>,
}

fn check_lookahead(store: &TermStore, n: &LookaheadMtt) -> Result<(), AppError> {
    let r = n.la_states.len();
    for &f in &n.base.sigma {
        let k = store.sym(f).rank;
        for g in tuples(r, k) {
            if !n.la_trans.contains_key(&(f, g.clone())) {
                return Err(AppError::MissingLookahead {
                    symbol: store.sym_name(f).to_string(),
                    states: n.guard_names(&g),
                });
            }
            for q in n.base.state_ids() {
                let count = n
                    .rules
                    .iter()
                    .filter(|x| x.state == q && x.symbol == f && x.guard == g)
                    .count();
                let (state, symbol, guard) = (
                    n.base.state_name(q).to_string(),
                    store.sym_name(f).to_string(),
                    n.guard_names(&g),
                );
                match count {
                    0 => {
                        return Err(AppError::MissingGuardedRule {
                            state,
                            symbol,
                            guard,
                        })
                    }
                    1 => {}
                    _ => {
                        return Err(AppError::DuplicateGuardedRule {
                            state,
                            symbol,
                            guard,
                        })
                    }
                }
            }
        }
    }
    Ok(())
}

/// Encodes both look-ahead automata into the input alphabet.
///
/// Each symbol `f` of rank `k` becomes one symbol per pair of look-ahead
/// vectors, and each transducer picks its rule by its own vector. States are
/// unchanged. The returned automaton only accepts trees whose annotations
/// agree with the actual runs; its initial state leaves the root value free.
pub fn remove_lookahead(
    store: &mut TermStore,
    n1: &LookaheadMtt,
    n2: &LookaheadMtt,
) -> Result<LookaheadFree, AppError> {
    let sig1: BTreeSet<SymId> = n1.base.sigma.iter().copied().collect();
    let sig2: BTreeSet<SymId> = n2.base.sigma.iter().copied().collect();
    if sig1 != sig2 {
        return Err(AppError::AlphabetMismatch);
    }
    check_lookahead(store, n1)?;
    check_lookahead(store, n2)?;
    let (r1, r2) = (n1.la_states.len(), n2.la_states.len());
    let mut symbols = HashMap::new();
    let mut sigma = Vec::new();
    for &f in &n1.base.sigma {
        let k = store.sym(f).rank;
        let name = store.sym_name(f).to_string();
        for g1 in tuples(r1, k) {
            for g2 in tuples(r2, k) {
                let a = store.symbol(
                    &annotated_name(n1, n2, &name, &g1, &g2),
                    k,
                    SymbolClass::Input,
                )?;
                sigma.push(a);
                symbols.insert((f, g1.clone(), g2), a);
            }
        }
    }
    let build = |n: &LookaheadMtt, first: bool| {
        let mut m = n.base.without_rules();
        m.sigma = sigma.clone();
        for ((f, g1, g2), &a) in symbols_sorted(&symbols) {
            let g = if first { g1 } else { g2 };
            for q in n.base.state_ids() {
                let rhs = n.rule(q, *f, g).expect("checked").clone();
                m.add_rule(q, a, rhs);
            }
        }
        m
    };
    let first = build(n1, true);
    let second = build(n2, false);

    // State 0 accepts any root value; the others fix the pair of values.
    let mut states = vec!["init".to_string()];
    let mut ids: HashMap<(LaState, LaState), DState> = HashMap::new();
    let mut trans = BTreeMap::new();
    let mut queue = VecDeque::from([None]);
    let mut done = BTreeSet::new();
    while let Some(want) = queue.pop_front() {
        let from = match want {
            None => DState(0),
            Some(p) => ids[&p],
        };
        if !done.insert(from) {
            continue;
        }
        for ((f, g1, g2), &a) in symbols_sorted(&symbols) {
            let v1 = n1.la_trans[&(*f, g1.clone())];
            let v2 = n2.la_trans[&(*f, g2.clone())];
            if let Some((w1, w2)) = want {
                if (v1, v2) != (w1, w2) {
                    continue;
                }
            }
            let kids: Vec<DState> = g1
                .iter()
                .zip(g2)
                .map(|(&x, &y)| {
                    *ids.entry((x, y)).or_insert_with(|| {
                        states.push(format!(
                            "{}|{}",
                            n1.la_states[x.index()],
                            n2.la_states[y.index()]
                        ));
                        queue.push_back(Some((x, y)));
                        DState(states.len() as u32 - 1)
                    })
                })
                .collect();
            trans.insert((from, a), kids);
        }
    }
    let runs = Dta {
        states,
        sigma,
        init: DState(0),
        trans,
        witnesses: Vec::new(),
    };
    Ok(LookaheadFree {
        first,
        second,
        runs,
        symbols,
    })
}

fn symbols_sorted(
    symbols: &HashMap<(SymId, Vec<LaState>, Vec<LaState>), SymId>,
) -> Vec<(&(SymId, Vec<LaState>, Vec<LaState>), &SymId)> {
    let mut v: Vec<_> = symbols.iter().collect();
    v.sort_by_key(|(_, &a)| a);
    v
}

/// Annotates a plain input tree with the runs of both look-ahead automata.
pub fn annotate_input(
    store: &mut TermStore,
    n1: &LookaheadMtt,
    n2: &LookaheadMtt,
    free: &LookaheadFree,
    t: TermId,
) -> Option<TermId> {
    let mut m1 = HashMap::new();
    let mut m2 = HashMap::new();
    annotate_rec(store, n1, n2, free, t, &mut m1, &mut m2)
}

fn annotate_rec(
    store: &mut TermStore,
    n1: &LookaheadMtt,
    n2: &LookaheadMtt,
    free: &LookaheadFree,
    t: TermId,
    m1: &mut HashMap<TermId, LaState>,
    m2: &mut HashMap<TermId, LaState>,
) -> Option<TermId> {
    let kids = store.children(t).to_vec();
    let g1: Option<Vec<LaState>> = kids.iter().map(|&c| n1.classify(store, c, m1)).collect();
    let g2: Option<Vec<LaState>> = kids.iter().map(|&c| n2.classify(store, c, m2)).collect();
    let a = *free.symbols.get(&(store.head(t), g1?, g2?))?;
    let mut new = Vec::with_capacity(kids.len());
    for c in kids {
        new.push(annotate_rec(store, n1, n2, free, c, m1, m2)?);
    }
    Some(store.app(a, &new))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_leaf_dta(store: &mut TermStore, split: bool) -> Dta {
        let g = store.symbol("g", 2, SymbolClass::Input).unwrap();
        let a = store.symbol("a", 0, SymbolClass::Input).unwrap();
        let mut trans = BTreeMap::new();
        if split {
            trans.insert((DState(0), g), vec![DState(1), DState(2)]);
            trans.insert((DState(1), a), vec![]);
            trans.insert((DState(2), a), vec![]);
        } else {
            trans.insert((DState(0), g), vec![DState(1), DState(1)]);
            trans.insert((DState(1), a), vec![]);
        }
        Dta {
            states: if split {
                vec!["r0".into(), "ra".into(), "rb".into()]
            } else {
                vec!["r0".into(), "r".into()]
            },
            sigma: vec![g, a],
            init: DState(0),
            trans,
            witnesses: vec![],
        }
    }

    #[test]
    fn duplicated_states_are_equivalent() {
        let mut s = TermStore::new();
        let raw = two_leaf_dta(&mut s, true);
        let d1 = crate::model::dta_analyze(&mut s, &raw).unwrap();
        let raw = two_leaf_dta(&mut s, false);
        let d2 = crate::model::dta_analyze(&mut s, &raw).unwrap();
        assert!(dta_equiv(&mut s, &d1, &d2).equivalent);
        assert!(dta_equiv(&mut s, &d1, &d1).equivalent);
    }

    #[test]
    fn trivial_automaton_differs_on_leaf_root() {
        let mut s = TermStore::new();
        let raw = two_leaf_dta(&mut s, false);
        let d1 = crate::model::dta_analyze(&mut s, &raw).unwrap();
        let t = Dta::trivial(&s, &d1.sigma.clone());
        let t = crate::model::dta_analyze(&mut s, &t).unwrap();
        let r = dta_equiv(&mut s, &t, &d1);
        assert!(!r.equivalent);
        let w = r.witness.unwrap();
        assert!(t.accepts(&s, w) != d1.accepts(&s, w));
        assert_eq!(s.render(w), "a");
    }

    #[test]
    fn nested_witness_is_in_the_symmetric_difference() {
        let mut s = TermStore::new();
        let raw = two_leaf_dta(&mut s, false);
        let d1 = crate::model::dta_analyze(&mut s, &raw).unwrap();
        // g(a, a) | g(g(a,a), a)
        let g = s.lookup(SymbolClass::Input, "g").unwrap();
        let a = s.lookup(SymbolClass::Input, "a").unwrap();
        let mut trans = d1.trans.clone();
        trans.insert((DState(2), g), vec![DState(1), DState(1)]);
        trans.insert((DState(2), a), vec![]);
        trans.insert((DState(0), g), vec![DState(2), DState(1)]);
        let d2 = Dta {
            states: vec!["r0".into(), "r".into(), "s".into()],
            sigma: vec![g, a],
            init: DState(0),
            trans,
            witnesses: vec![],
        };
        let d2 = crate::model::dta_analyze(&mut s, &d2).unwrap();
        let r = dta_equiv(&mut s, &d1, &d2);
        let w = r.witness.unwrap();
        assert_eq!(s.render(w), "g(g(a,a),a)");
        assert!(!d1.accepts(&s, w) && d2.accepts(&s, w));
    }

    #[test]
    fn totalize_counts_missing_rules() {
        let mut s = TermStore::new();
        let a = s.symbol("a", 0, SymbolClass::Input).unwrap();
        let f = s.symbol("f", 1, SymbolClass::Input).unwrap();
        let mut m = Mtt::new(vec![a, f], vec![], vec![], 0);
        m.add_state("q");
        let t = totalize(&mut s, &m, "bot").unwrap();
        assert_eq!(t.rules().len(), 2);
        assert_eq!(t.delta_o.len(), 1);
        let again = totalize(&mut s, &t, "bot").unwrap();
        assert_eq!(again.rules().len(), 2);
    }
}
