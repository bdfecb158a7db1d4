//! State-output prefixes and the earliest normal form.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::model::{
    rhs_decompose, Axiom, AxiomCall, Call, Dta, EvalError, Evaluator, Leaf, Mtt, Rhs, StateId,
    StateMap,
};
use crate::terms::{Pattern, TermId, TermStore, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EarliestError {
    #[error("no witness tree for automaton state `{0}`")]
    MissingWitness(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("right-hand side of `{state}` does not instantiate its prefix")]
    Misaligned { state: String },
    #[error("state `{state}` still has prefix {prefix} after the transformation")]
    NotEarliest { state: String, prefix: String },
}

/// `pref(q)` for every state, with iteration statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixTable {
    pub prefixes: Vec<Pattern>,
    /// Full passes over the rules, including the last one that changed nothing.
    pub passes: usize,
    /// Total node count of the initial values.
    pub init_size: usize,
}

impl PrefixTable {
    pub fn get(&self, q: StateId) -> Pattern {
        self.prefixes[q.index()]
    }

    fn tree(&self, q: StateId) -> TermId {
        match self.prefixes[q.index()] {
            Pattern::Tree(t) => t,
            Pattern::Bottom => unreachable!("prefixes are initialized from witness outputs"),
        }
    }
}

/// Callees before callers where the call graph allows it.
fn callee_first_order(m: &Mtt) -> Vec<StateId> {
    let n = m.states.len();
    let mut succ: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for r in m.rules() {
        for c in r.rhs.calls() {
            succ[r.state.index()].push(c.state);
        }
    }
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for start in m.state_ids() {
        if seen[start.index()] {
            continue;
        }
        seen[start.index()] = true;
        let mut stack = vec![(start, 0usize)];
        while let Some((q, i)) = stack.pop() {
            if let Some(&next) = succ[q.index()].get(i) {
                stack.push((q, i + 1));
                if !seen[next.index()] {
                    seen[next.index()] = true;
                    stack.push((next, 0));
                }
            } else {
                order.push(q);
            }
        }
    }
    order
}

/// Least solution of `Y_q ⊒ p[Z…]` over all rules, started from the prefix
/// of each state's output on the witness of its automaton state.
pub fn compute_prefixes(
    store: &mut TermStore,
    m: &Mtt,
    pi: &StateMap,
    d: &Dta,
) -> Result<PrefixTable, EarliestError> {
    let placeholders = store.param_vars(m.params, false);
    let mut eval = Evaluator::new(m);
    let mut prefixes = Vec::with_capacity(m.states.len());
    let mut init_size = 0;
    for q in m.state_ids() {
        let b = pi.get(q);
        let w = d
            .witness(b)
            .ok_or_else(|| EarliestError::MissingWitness(d.states[b.index()].clone()))?;
        let out = eval.state(store, q, w, &placeholders)?;
        let p = store.output_prefix(out);
        if let Pattern::Tree(t) = p {
            init_size += store.dag_size(t);
        }
        prefixes.push(p);
    }
    let mut shapes: Vec<Vec<(Pattern, Vec<Leaf>)>> = vec![Vec::new(); m.states.len()];
    for r in m.rules() {
        shapes[r.state.index()].push(rhs_decompose(store, &r.rhs));
    }
    let order = callee_first_order(m);
    let top = store.top_pattern();
    let mut passes = 0;
    loop {
        passes += 1;
        let mut changed = false;
        for &q in &order {
            let mut cur = prefixes[q.index()];
            for (p, leaves) in &shapes[q.index()] {
                let fills: Vec<Pattern> = leaves
                    .iter()
                    .map(|l| match l {
                        Leaf::Param(_) => top,
                        Leaf::Call(c) => prefixes[c.state.index()],
                    })
                    .collect();
                let inst = store
                    .pattern_substitute(*p, &fills)
                    .expect("leaf count matches hole count");
                cur = store.pattern_join(cur, inst);
            }
            if cur != prefixes[q.index()] {
                prefixes[q.index()] = cur;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(PrefixTable {
        prefixes,
        passes,
        init_size,
    })
}

/// Builds the equivalent transducer whose states all have prefix `⊤`.
///
/// New states are pairs of an old state and a hole position of its prefix,
/// named `q@v`. States that return one of their parameters on every input
/// are inlined where they are called with a plain parameter.
pub fn earliest_transform(
    store: &mut TermStore,
    m: &Mtt,
    a: &Axiom,
    pi: &StateMap,
    d: &Dta,
) -> Result<(Mtt, Axiom, StateMap, PrefixTable), EarliestError> {
    let table = compute_prefixes(store, m, pi, d)?;
    let mut out = m.without_rules();
    out.states.clear();
    let mut holes: Vec<Vec<StateId>> = Vec::with_capacity(m.states.len());
    let mut new_pi = Vec::new();
    for q in m.state_ids() {
        let positions = store.top_positions(table.tree(q));
        let ids = positions
            .iter()
            .map(|v| {
                out.states.push(format!("{}@{}", m.state_name(q), v));
                new_pi.push(pi.get(q));
                StateId(out.states.len() as u32 - 1)
            })
            .collect();
        holes.push(ids);
    }
    for rule in m.rules() {
        let expanded = expand_calls(store, &table, &holes, &rule.rhs);
        let mut parts = Vec::new();
        split_against(store, table.tree(rule.state), &expanded, &mut parts).ok_or_else(|| {
            EarliestError::Misaligned {
                state: m.state_name(rule.state).to_string(),
            }
        })?;
        for (&nq, rhs) in holes[rule.state.index()].iter().zip(parts) {
            out.add_rule(nq, rule.symbol, rhs);
        }
    }
    let mut fills = Vec::new();
    let mut calls = Vec::new();
    for c in &a.calls {
        let pref = table.tree(c.state);
        fills.push(pref);
        for &nq in &holes[c.state.index()] {
            calls.push(AxiomCall {
                state: nq,
                args: c.args.clone(),
            });
        }
    }
    let pattern = store.fill_tops(a.pattern, &fills);
    let axiom = Axiom { pattern, calls };
    let out = inline_forwarders(store, &out);
    let (out, axiom, new_pi) = prune_unreachable(&out, &axiom, &StateMap(new_pi));
    let check = compute_prefixes(store, &out, &new_pi, d)?;
    let top = store.top_pattern();
    for q in out.state_ids() {
        if check.get(q) != top {
            return Err(EarliestError::NotEarliest {
                state: out.state_name(q).to_string(),
                prefix: store.render_pattern(check.get(q)),
            });
        }
    }
    Ok((out, axiom, new_pi, table))
}

fn expand_calls(store: &TermStore, table: &PrefixTable, holes: &[Vec<StateId>], rhs: &Rhs) -> Rhs {
    rhs.map_calls(&mut |c: &Call| {
        let mut next = 0;
        pattern_with_calls(
            store,
            table.tree(c.state),
            &holes[c.state.index()],
            c,
            &mut next,
        )
    })
}

fn pattern_with_calls(
    store: &TermStore,
    p: TermId,
    holes: &[StateId],
    c: &Call,
    next: &mut usize,
) -> Rhs {
    if store.is_top(p) {
        let state = holes[*next];
        *next += 1;
        return Rhs::Call(Call {
            state,
            child: c.child,
            args: c.args.clone(),
        });
    }
    let kids = store
        .children(p)
        .iter()
        .map(|&k| pattern_with_calls(store, k, holes, c, next))
        .collect();
    Rhs::Out(store.head(p), kids)
}

/// Collects the subtrees of `rhs` sitting at the holes of `pref`, left to right.
fn split_against(store: &TermStore, pref: TermId, rhs: &Rhs, parts: &mut Vec<Rhs>) -> Option<()> {
    if store.is_top(pref) {
        parts.push(rhs.clone());
        return Some(());
    }
    match rhs {
        Rhs::Out(s, kids) if *s == store.head(pref) => {
            for (&p, k) in store.children(pref).iter().zip(kids) {
                split_against(store, p, k, parts)?;
            }
            Some(())
        }
        _ => None,
    }
}

/// Replaces calls `q(x_i, …, y_k, …)` by `y_k` when every rule of `q`
/// returns its parameter at that index.
fn inline_forwarders(store: &TermStore, m: &Mtt) -> Mtt {
    let mut cur = m.clone();
    loop {
        let mut forwards: HashMap<StateId, usize> = HashMap::new();
        for q in cur.state_ids() {
            let mut rules = cur.rules().iter().filter(|r| r.state == q);
            let Some(first) = rules.next() else { continue };
            let Rhs::Param(j) = first.rhs else { continue };
            if rules.all(|r| r.rhs == Rhs::Param(j)) {
                forwards.insert(q, j);
            }
        }
        if forwards.is_empty() {
            return cur;
        }
        let mut changed = false;
        let mut next = cur.without_rules();
        for r in cur.rules() {
            let rhs = r.rhs.map_calls(&mut |c: &Call| {
                if let Some(&j) = forwards.get(&c.state) {
                    if let Some(Var::Y(k)) = store.as_var(c.args[j - 1]) {
                        changed = true;
                        return Rhs::Param(k as usize);
                    }
                }
                Rhs::Call(c.clone())
            });
            next.add_rule(r.state, r.symbol, rhs);
        }
        if !changed {
            return cur;
        }
        cur = next;
    }
}

/// Keeps only states reachable from the axiom, renumbering them.
pub fn prune_unreachable(m: &Mtt, a: &Axiom, pi: &StateMap) -> (Mtt, Axiom, StateMap) {
    let n = m.states.len();
    let mut succ: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for r in m.rules() {
        for c in r.rhs.calls() {
            succ[r.state.index()].push(c.state);
        }
    }
    let mut seen = vec![false; n];
    let mut queue: VecDeque<StateId> = VecDeque::new();
    for c in &a.calls {
        if !seen[c.state.index()] {
            seen[c.state.index()] = true;
            queue.push_back(c.state);
        }
    }
    while let Some(q) = queue.pop_front() {
        for &s in &succ[q.index()] {
            if !seen[s.index()] {
                seen[s.index()] = true;
                queue.push_back(s);
            }
        }
    }
    let mut renumber = vec![None; n];
    let mut out = m.without_rules();
    out.states.clear();
    let mut new_pi = Vec::new();
    for q in m.state_ids() {
        if seen[q.index()] {
            renumber[q.index()] = Some(StateId(out.states.len() as u32));
            out.states.push(m.state_name(q).to_string());
            new_pi.push(pi.get(q));
        }
    }
    for r in m.rules() {
        let Some(nq) = renumber[r.state.index()] else {
            continue;
        };
        let rhs = r.rhs.map_calls(&mut |c: &Call| {
            Rhs::Call(Call {
                state: renumber[c.state.index()].expect("callee of a reachable state"),
                child: c.child,
                args: c.args.clone(),
            })
        });
        out.add_rule(nq, r.symbol, rhs);
    }
    let axiom = Axiom {
        pattern: a.pattern,
        calls: a
            .calls
            .iter()
            .map(|c| AxiomCall {
                state: renumber[c.state.index()].expect("axiom state is reachable"),
                args: c.args.clone(),
            })
            .collect(),
    };
    (out, axiom, StateMap(new_pi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{product_annotate, render_rule, Mode};
    use crate::syntax::{parse_spec, parse_tree};
    use crate::terms::SymbolClass;

    const TOTAL: &str = include_str!("../../../fixtures/mtern_total.mtt");

    fn load(s: &mut TermStore) -> (Mtt, Axiom, StateMap, Dta) {
        let spec = parse_spec(s, TOTAL).unwrap();
        let m = spec.mtt.unwrap();
        let a = spec.axiom.unwrap();
        let raw = Dta::trivial(s, &m.sigma);
        let d = crate::model::dta_analyze(s, &raw).unwrap();
        let (m, a, pi) = product_annotate(s, &m, &a, &d, Mode::Total).unwrap();
        (m, a, pi, d)
    }

    #[test]
    fn ternary_prefixes() {
        let mut s = TermStore::new();
        let (m, _, pi, d) = load(&mut s);
        let t = compute_prefixes(&mut s, &m, &pi, &d).unwrap();
        let shown: Vec<String> = m.state_ids().map(|q| s.render_pattern(t.get(q))).collect();
        assert_eq!(shown, ["⊤", "⊤", "*(⊤,EXP(3,⊤))"]);
        assert!(t.passes <= 2, "{} passes", t.passes);
    }

    #[test]
    fn ternary_earliest_rules() {
        let mut s = TermStore::new();
        let (m, a, pi, d) = load(&mut s);
        let (e, ea, _, _) = earliest_transform(&mut s, &m, &a, &pi, &d).unwrap();
        let rules: Vec<String> = e.rules().iter().map(|r| render_rule(&s, &e, r)).collect();
        assert!(
            rules.contains(
                &"q@ε(f(x1,x2), y1) = +(*(r@1(x2, y1), EXP(3, y1)), q@ε(x1, s(y1)))".to_string()
            ),
            "{rules:#?}"
        );
        for i in ["0", "1", "2"] {
            assert!(rules.contains(&format!("r@1({i}, y1) = {i}")), "{rules:#?}");
        }
        assert!(e.state_named("r@2.2").is_none());
        for text in [
            "g(f(f(f(2,1),0),1),f(0,2))",
            "f(1,2)",
            "g(g(0,1),f(2,g(1,1)))",
        ] {
            let t = parse_tree(&mut s, &m.sigma, SymbolClass::Input, text).unwrap();
            let before = crate::model::evaluate_axiom(&mut s, &m, &a, t).unwrap();
            let after = crate::model::evaluate_axiom(&mut s, &e, &ea, t).unwrap();
            assert_eq!(before, after, "{text}");
        }
    }

    #[test]
    fn earliest_is_idempotent() {
        let mut s = TermStore::new();
        let (m, a, pi, d) = load(&mut s);
        let (e, ea, epi, _) = earliest_transform(&mut s, &m, &a, &pi, &d).unwrap();
        let (e2, ea2, _, t2) = earliest_transform(&mut s, &e, &ea, &epi, &d).unwrap();
        let top = s.top_pattern();
        assert!(t2.prefixes.iter().all(|&p| p == top));
        assert_eq!(e2.rules().len(), e.rules().len());
        assert_eq!(ea2.pattern, ea.pattern);
    }
}
