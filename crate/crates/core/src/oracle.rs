//! Brute-force reference: enumerate inputs and compare outputs.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::ops::ControlFlow;

use crate::applications::{LaState, LookaheadMtt};
use crate::model::{Axiom, DState, Dta, EvalError, Evaluator, Mtt, Rhs, StateId};
use crate::terms::{DeweyPath, SymId, TermId, TermStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumBudget {
    pub max_height: usize,
    pub max_count: usize,
}

impl EnumBudget {
    pub fn height(max_height: usize) -> Self {
        EnumBudget {
            max_height,
            max_count: usize::MAX,
        }
    }
}

/// Calls `visit` on the trees of height at most `budget.max_height`
/// accepted from `start` (all trees when `d` is `None`), ordered by height
/// and then by preorder symbol names. Returns how many trees were visited.
pub fn for_each_input(
    store: &mut TermStore,
    sigma: &[SymId],
    d: Option<(&Dta, DState)>,
    budget: EnumBudget,
    visit: &mut dyn FnMut(&mut TermStore, TermId) -> ControlFlow<()>,
) -> usize {
    let trivial;
    let (d, start) = match d {
        Some(x) => x,
        None => {
            trivial = Dta::trivial(store, sigma);
            (&trivial, DState(0))
        }
    };
    let n = d.states.len();
    let mut syms: Vec<SymId> = d.sigma.clone();
    syms.sort_by(|&a, &b| store.sym_name(a).cmp(store.sym_name(b)).then(a.cmp(&b)));
    syms.dedup();
    // Trees of height below the current layer, per state, in preorder-name order.
    let mut below: Vec<Vec<(TermId, usize)>> = vec![Vec::new(); n];
    let mut count = 0;
    for h in 1..=budget.max_height {
        let mut layer: Vec<Vec<(TermId, usize)>> = vec![Vec::new(); n];
        let last = h == budget.max_height;
        let states: Vec<DState> = if last {
            vec![start]
        } else {
            d.state_ids().collect()
        };
        for b in states {
            for &f in &syms {
                let Some(kids) = d.trans.get(&(b, f)) else {
                    continue;
                };
                let lists: Vec<&[(TermId, usize)]> =
                    kids.iter().map(|k| below[k.index()].as_slice()).collect();
                if lists.iter().any(|l| l.is_empty()) && !kids.is_empty() {
                    continue;
                }
                if kids.is_empty() {
                    if h == 1 {
                        let t = store.app(f, &[]);
                        layer[b.index()].push((t, 1));
                    }
                    continue;
                }
                let mut idx = vec![0usize; kids.len()];
                'tuples: loop {
                    let tallest = idx
                        .iter()
                        .zip(&lists)
                        .map(|(&i, l)| l[i].1)
                        .max()
                        .unwrap_or(0);
                    if tallest + 1 == h {
                        let args: Vec<TermId> =
                            idx.iter().zip(&lists).map(|(&i, l)| l[i].0).collect();
                        let t = store.app(f, &args);
                        layer[b.index()].push((t, h));
                    }
                    let mut pos = kids.len();
                    loop {
                        if pos == 0 {
                            break 'tuples;
                        }
                        pos -= 1;
                        idx[pos] += 1;
                        if idx[pos] < lists[pos].len() {
                            break;
                        }
                        idx[pos] = 0;
                    }
                }
            }
        }
        for &(t, _) in &layer[start.index()] {
            if count >= budget.max_count {
                return count;
            }
            count += 1;
            if visit(store, t).is_break() {
                return count;
            }
        }
        if last {
            break;
        }
        for (b, new) in layer.into_iter().enumerate() {
            if new.is_empty() {
                continue;
            }
            let old = std::mem::take(&mut below[b]);
            below[b] = merge_sorted(store, old, new);
        }
    }
    count
}

fn merge_sorted(
    store: &TermStore,
    a: Vec<(TermId, usize)>,
    b: Vec<(TermId, usize)>,
) -> Vec<(TermId, usize)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if store.cmp_preorder(a[i].0, b[j].0) != Ordering::Greater {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// The enumeration of [`for_each_input`] collected into a vector.
pub fn enumerate_inputs(
    store: &mut TermStore,
    sigma: &[SymId],
    d: Option<(&Dta, DState)>,
    budget: EnumBudget,
) -> Vec<TermId> {
    let mut out = Vec::new();
    for_each_input(store, sigma, d, budget, &mut |_, t| {
        out.push(t);
        ControlFlow::Continue(())
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleOutcome {
    AgreeUpToBudget { checked: usize },
    Counterexample(TermId),
}

impl OracleOutcome {
    pub fn counterexample(self) -> Option<TermId> {
        match self {
            OracleOutcome::Counterexample(t) => Some(t),
            OracleOutcome::AgreeUpToBudget { .. } => None,
        }
    }
}

/// First input in enumeration order on which the two transducers differ.
/// Inputs are restricted to the language of `d` when given.
pub fn oracle_decide(
    store: &mut TermStore,
    first: (&Mtt, &Axiom),
    second: (&Mtt, &Axiom),
    d: Option<&Dta>,
    budget: EnumBudget,
) -> Result<OracleOutcome, EvalError> {
    let mut e1 = Evaluator::new(first.0);
    let mut e2 = Evaluator::new(second.0);
    let mut found = None;
    let mut failure = None;
    let checked = for_each_input(
        store,
        &first.0.sigma,
        d.map(|d| (d, d.init)),
        budget,
        &mut |s, t| {
            let o1 = e1.axiom(s, first.1, t);
            let o2 = e2.axiom(s, second.1, t);
            match (o1, o2) {
                (Ok(a), Ok(b)) if a == b => ControlFlow::Continue(()),
                (Ok(_), Ok(_)) => {
                    found = Some(t);
                    ControlFlow::Break(())
                }
                (Err(e), _) | (_, Err(e)) => {
                    failure = Some(e);
                    ControlFlow::Break(())
                }
            }
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(match found {
        Some(t) => OracleOutcome::Counterexample(t),
        None => OracleOutcome::AgreeUpToBudget { checked },
    })
}

/// Like [`oracle_decide`] for partial transducers: an input is a
/// counterexample when exactly one side is defined or both are defined
/// with different outputs.
pub fn oracle_decide_partial(
    store: &mut TermStore,
    first: (&Mtt, &Axiom),
    second: (&Mtt, &Axiom),
    budget: EnumBudget,
) -> OracleOutcome {
    let mut e1 = Evaluator::new(first.0);
    let mut e2 = Evaluator::new(second.0);
    let mut found = None;
    let checked = for_each_input(store, &first.0.sigma, None, budget, &mut |s, t| {
        let o1 = e1.axiom(s, first.1, t).ok();
        let o2 = e2.axiom(s, second.1, t).ok();
        if o1 == o2 {
            ControlFlow::Continue(())
        } else {
            found = Some(t);
            ControlFlow::Break(())
        }
    });
    match found {
        Some(t) => OracleOutcome::Counterexample(t),
        None => OracleOutcome::AgreeUpToBudget { checked },
    }
}

/// One side of a state comparison: a state of a transducer with ground
/// parameter values.
#[derive(Debug, Clone, Copy)]
pub struct StateCall<'a> {
    pub mtt: &'a Mtt,
    pub state: StateId,
    pub params: &'a [TermId],
}

/// Whether both state calls produce the same output on every enumerated
/// input accepted from `b`.
pub fn oracle_state_equiv(
    store: &mut TermStore,
    first: StateCall,
    second: StateCall,
    d: &Dta,
    b: DState,
    budget: EnumBudget,
) -> Result<bool, EvalError> {
    let mut e1 = Evaluator::new(first.mtt);
    let mut e2 = Evaluator::new(second.mtt);
    let mut same = true;
    let mut failure = None;
    for_each_input(
        store,
        &first.mtt.sigma,
        Some((d, b)),
        budget,
        &mut |s, t| {
            let o1 = e1.state(s, first.state, t, first.params);
            let o2 = e2.state(s, second.state, t, second.params);
            match (o1, o2) {
                (Ok(a), Ok(c)) if a == c => ControlFlow::Continue(()),
                (Ok(_), Ok(_)) => {
                    same = false;
                    ControlFlow::Break(())
                }
                (Err(e), _) | (_, Err(e)) => {
                    failure = Some(e);
                    ControlFlow::Break(())
                }
            }
        },
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(same),
    }
}

/// Reference semantics of a transducer with look-ahead.
pub fn lookahead_evaluate(
    store: &mut TermStore,
    n: &LookaheadMtt,
    a: &Axiom,
    t: TermId,
) -> Result<TermId, EvalError> {
    let mut classes = HashMap::new();
    let mut vals = Vec::with_capacity(a.calls.len());
    for c in &a.calls {
        vals.push(la_state(
            store,
            n,
            &mut classes,
            c.state,
            t,
            &c.args,
            &DeweyPath::root(),
        )?);
    }
    Ok(store.fill_tops(a.pattern, &vals))
}

fn la_state(
    store: &mut TermStore,
    n: &LookaheadMtt,
    classes: &mut HashMap<TermId, LaState>,
    q: StateId,
    t: TermId,
    params: &[TermId],
    path: &DeweyPath,
) -> Result<TermId, EvalError> {
    let f = store.head(t);
    let no_rule = || EvalError::NoRule {
        state: n.base.state_name(q).to_string(),
        symbol: store.sym_name(f).to_string(),
        path: path.clone(),
    };
    let kids: Vec<TermId> = store.children(t).to_vec();
    let mut guard = Vec::with_capacity(kids.len());
    for &k in &kids {
        guard.push(n.classify(store, k, classes).ok_or_else(no_rule)?);
    }
    let rhs = n.rule(q, f, &guard).ok_or_else(no_rule)?.clone();
    la_rhs(store, n, classes, &rhs, &kids, params, path)
}

fn la_rhs(
    store: &mut TermStore,
    n: &LookaheadMtt,
    classes: &mut HashMap<TermId, LaState>,
    rhs: &Rhs,
    kids: &[TermId],
    params: &[TermId],
    path: &DeweyPath,
) -> Result<TermId, EvalError> {
    match rhs {
        Rhs::Out(s, sub) => {
            let mut vals = Vec::with_capacity(sub.len());
            for k in sub {
                vals.push(la_rhs(store, n, classes, k, kids, params, path)?);
            }
            Ok(store.app(*s, &vals))
        }
        Rhs::Param(j) => Ok(params[*j - 1]),
        Rhs::Call(c) => {
            let args: Vec<TermId> = c
                .args
                .iter()
                .map(|&a| store.instantiate_params(a, params, false))
                .collect();
            la_state(
                store,
                n,
                classes,
                c.state,
                kids[c.child - 1],
                &args,
                &path.child(c.child),
            )
        }
    }
}
