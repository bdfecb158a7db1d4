//! Seeded random transducers and automata for differential testing.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::model::{Axiom, AxiomCall, Call, DState, Dta, Mtt, Rhs, StateId};
use crate::terms::{SymId, SymbolClass, TermId, TermStore, Var};

/// Environment variable that fixes the corpus seed.
pub const SEED_VAR: &str = "MTT_EQUIV_SEED";

/// The seed from [`SEED_VAR`], or `default` when unset or unparsable.
pub fn seed_from_env(default: u64) -> u64 {
    std::env::var(SEED_VAR)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(default)
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

#[derive(Debug, Clone)]
pub struct Alphabets {
    pub sigma: Vec<SymId>,
    pub delta_o: Vec<SymId>,
    pub delta_i: Vec<SymId>,
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_states: usize,
    pub max_params: usize,
    pub rhs_depth: usize,
    pub max_axiom_calls: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            max_states: 4,
            max_params: 2,
            rhs_depth: 3,
            max_axiom_calls: 2,
        }
    }
}

const SIGMA_POOL: &[(&str, usize)] = &[("f", 2), ("g", 1), ("h", 1), ("a", 0), ("b", 0)];
const OUT_POOL: &[(&str, usize)] = &[("k", 2), ("m", 1), ("c", 0), ("e", 0)];
const INNER_POOL: &[(&str, usize)] = &[("s", 1), ("t", 2), ("z", 0), ("w", 0)];

fn pick_symbols(
    store: &mut TermStore,
    rng: &mut StdRng,
    pool: &[(&str, usize)],
    class: SymbolClass,
    max: usize,
) -> Vec<SymId> {
    let leaves: Vec<&(&str, usize)> = pool.iter().filter(|s| s.1 == 0).collect();
    let inner: Vec<&(&str, usize)> = pool.iter().filter(|s| s.1 > 0).collect();
    let first = *leaves.choose(rng).expect("pool has a constant");
    let mut rest: Vec<&(&str, usize)> = pool.iter().filter(|&s| s != first).collect();
    rest.shuffle(rng);
    let want = rng.gen_range(2..=max.min(pool.len()));
    let mut chosen = vec![first];
    chosen.extend(rest.into_iter().take(want - 1));
    if !chosen.iter().any(|s| s.1 > 0) {
        chosen.pop();
        chosen.push(inner.choose(rng).expect("pool has a non-constant"));
    }
    let mut ids: Vec<SymId> = chosen
        .into_iter()
        .map(|&(n, r)| {
            store
                .symbol(n, r, class)
                .expect("pool symbols are consistent")
        })
        .collect();
    ids.sort();
    ids
}

/// Small random alphabets: at most four input symbols with at most one of
/// rank two, at most three parameter symbols.
pub fn random_alphabets(store: &mut TermStore, rng: &mut StdRng) -> Alphabets {
    let mut sigma = pick_symbols(store, rng, SIGMA_POOL, SymbolClass::Input, 4);
    let f2 = store.symbol("f", 2, SymbolClass::Input).expect("pool");
    let g1 = store.symbol("g", 1, SymbolClass::Input).expect("pool");
    let h1 = store.symbol("h", 1, SymbolClass::Input).expect("pool");
    if sigma.contains(&f2) && sigma.contains(&g1) && sigma.contains(&h1) {
        sigma.retain(|&s| s != h1);
    }
    Alphabets {
        sigma,
        delta_o: pick_symbols(store, rng, OUT_POOL, SymbolClass::Output, 4),
        delta_i: pick_symbols(store, rng, INNER_POOL, SymbolClass::Inner, 3),
    }
}

fn random_inner(
    store: &mut TermStore,
    rng: &mut StdRng,
    delta_i: &[SymId],
    vars: &[TermId],
    depth: usize,
) -> TermId {
    let leaves: Vec<SymId> = delta_i
        .iter()
        .copied()
        .filter(|&s| store.sym(s).rank == 0)
        .collect();
    let nodes: Vec<SymId> = delta_i
        .iter()
        .copied()
        .filter(|&s| store.sym(s).rank > 0)
        .collect();
    if depth > 1 && !nodes.is_empty() && rng.gen_bool(0.5) {
        let f = *nodes.choose(rng).expect("nonempty");
        let kids: Vec<TermId> = (0..store.sym(f).rank)
            .map(|_| random_inner(store, rng, delta_i, vars, depth - 1))
            .collect();
        return store.app(f, &kids);
    }
    if !vars.is_empty() && rng.gen_bool(0.7) {
        return *vars.choose(rng).expect("nonempty");
    }
    let c = *leaves.choose(rng).expect("a constant parameter symbol");
    store.app(c, &[])
}

fn random_call(
    store: &mut TermStore,
    rng: &mut StdRng,
    alph: &Alphabets,
    states: usize,
    params: usize,
    rank: usize,
) -> Rhs {
    let vars = store.param_vars(params, false);
    Rhs::Call(Call {
        state: StateId(rng.gen_range(0..states) as u32),
        child: rng.gen_range(1..=rank),
        args: (0..params)
            .map(|_| random_inner(store, rng, &alph.delta_i, &vars, 2))
            .collect(),
    })
}

fn random_rhs(
    store: &mut TermStore,
    rng: &mut StdRng,
    alph: &Alphabets,
    states: usize,
    params: usize,
    rank: usize,
    depth: usize,
) -> Rhs {
    let outs_leaf: Vec<SymId> = alph
        .delta_o
        .iter()
        .copied()
        .filter(|&s| store.sym(s).rank == 0)
        .collect();
    let outs_node: Vec<SymId> = alph
        .delta_o
        .iter()
        .copied()
        .filter(|&s| store.sym(s).rank > 0)
        .collect();
    let roll: f64 = rng.gen();
    if depth > 1 && !outs_node.is_empty() && roll < 0.35 {
        let f = *outs_node.choose(rng).expect("nonempty");
        let kids = (0..store.sym(f).rank)
            .map(|_| random_rhs(store, rng, alph, states, params, rank, depth - 1))
            .collect();
        return Rhs::Out(f, kids);
    }
    if rank > 0 && roll < 0.8 {
        return random_call(store, rng, alph, states, params, rank);
    }
    if params > 0 && roll < 0.93 {
        return Rhs::Param(rng.gen_range(1..=params));
    }
    Rhs::Out(
        *outs_leaf.choose(rng).expect("a constant output symbol"),
        Vec::new(),
    )
}

fn random_axiom(
    store: &mut TermStore,
    rng: &mut StdRng,
    alph: &Alphabets,
    states: usize,
    params: usize,
    max_calls: usize,
) -> Axiom {
    let top = store.top();
    let binary = alph
        .delta_o
        .iter()
        .copied()
        .find(|&s| store.sym(s).rank == 2);
    let pattern = match binary {
        Some(k) if max_calls >= 2 && rng.gen_bool(0.3) => store.app(k, &[top, top]),
        _ => top,
    };
    let calls = (0..store.count_tops(pattern))
        .map(|_| AxiomCall {
            state: StateId(rng.gen_range(0..states) as u32),
            args: (0..params)
                .map(|_| random_inner(store, rng, &alph.delta_i, &[], 2))
                .collect(),
        })
        .collect();
    Axiom { pattern, calls }
}

/// A random total transducer with its axiom.
pub fn random_mtt(
    store: &mut TermStore,
    rng: &mut StdRng,
    alph: &Alphabets,
    shape: Shape,
) -> (Mtt, Axiom) {
    let n = rng.gen_range(1..=shape.max_states);
    let l = rng.gen_range(0..=shape.max_params);
    let mut m = Mtt::new(
        alph.sigma.clone(),
        alph.delta_o.clone(),
        alph.delta_i.clone(),
        l,
    );
    for i in 0..n {
        m.add_state(&format!("q{i}"));
    }
    for q in 0..n {
        for &f in &alph.sigma {
            let rank = store.sym(f).rank;
            let rhs = random_rhs(store, rng, alph, n, l, rank, shape.rhs_depth);
            m.add_rule(StateId(q as u32), f, rhs);
        }
    }
    let a = random_axiom(store, rng, alph, n, l, shape.max_axiom_calls);
    (m, a)
}

fn rebuild(m: &Mtt, f: &mut dyn FnMut(StateId, SymId, &Rhs) -> Rhs) -> Mtt {
    let mut out = m.without_rules();
    for r in m.rules() {
        let rhs = f(r.state, r.symbol, &r.rhs);
        out.add_rule(r.state, r.symbol, rhs);
    }
    out
}

/// Same transducer with states renamed and renumbered.
pub fn rename_states(m: &Mtt, a: &Axiom, rng: &mut StdRng) -> (Mtt, Axiom) {
    let n = m.states.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let map = |q: StateId| StateId(perm[q.index()] as u32);
    let mut out = m.without_rules();
    out.states = vec![String::new(); n];
    for q in m.state_ids() {
        out.states[perm[q.index()]] = format!("p{}_{}", perm[q.index()], m.state_name(q));
    }
    let mut rules: Vec<_> = m.rules().to_vec();
    rules.shuffle(rng);
    for r in rules {
        let rhs = r.rhs.map_calls(&mut |c: &Call| {
            Rhs::Call(Call {
                state: map(c.state),
                child: c.child,
                args: c.args.clone(),
            })
        });
        out.add_rule(map(r.state), r.symbol, rhs);
    }
    let axiom = Axiom {
        pattern: a.pattern,
        calls: a
            .calls
            .iter()
            .map(|c| AxiomCall {
                state: map(c.state),
                args: c.args.clone(),
            })
            .collect(),
    };
    (out, axiom)
}

/// Same transducer with its parameter positions permuted.
pub fn permute_params(store: &mut TermStore, m: &Mtt, a: &Axiom, rng: &mut StdRng) -> (Mtt, Axiom) {
    let l = m.params;
    let mut perm: Vec<usize> = (0..l).collect();
    perm.shuffle(rng);
    let renamed: Vec<TermId> = (0..l)
        .map(|j| store.var(Var::Y(perm[j] as u32 + 1)))
        .collect();
    let move_args = |store: &mut TermStore, args: &[TermId], rename: bool| {
        let mut out: Vec<Option<TermId>> = vec![None; l];
        for (j, &t) in args.iter().enumerate() {
            out[perm[j]] = Some(if rename {
                store.instantiate_params(t, &renamed, false)
            } else {
                t
            });
        }
        out.into_iter()
            .map(|t| t.expect("permutation"))
            .collect::<Vec<_>>()
    };
    fn walk(
        store: &mut TermStore,
        rhs: &Rhs,
        perm: &[usize],
        mv: &dyn Fn(&mut TermStore, &[TermId], bool) -> Vec<TermId>,
    ) -> Rhs {
        match rhs {
            Rhs::Out(s, kids) => {
                Rhs::Out(*s, kids.iter().map(|k| walk(store, k, perm, mv)).collect())
            }
            Rhs::Param(j) => Rhs::Param(perm[j - 1] + 1),
            Rhs::Call(c) => Rhs::Call(Call {
                state: c.state,
                child: c.child,
                args: mv(store, &c.args, true),
            }),
        }
    }
    let mut out = m.without_rules();
    for r in m.rules() {
        let rhs = walk(store, &r.rhs, &perm, &move_args);
        out.add_rule(r.state, r.symbol, rhs);
    }
    let calls = a
        .calls
        .iter()
        .map(|c| AxiomCall {
            state: c.state,
            args: move_args(store, &c.args, false),
        })
        .collect();
    (
        out,
        Axiom {
            pattern: a.pattern,
            calls,
        },
    )
}

/// Adds a copy of one state and sends some of its calls to the copy.
pub fn duplicate_state(m: &Mtt, a: &Axiom, rng: &mut StdRng) -> (Mtt, Axiom) {
    let target = StateId(rng.gen_range(0..m.states.len()) as u32);
    let mut out = m.without_rules();
    let copy = out.add_state(&format!("{}_copy", m.state_name(target)));
    let redirect = |c: &Call, rng: &mut StdRng| {
        let state = if c.state == target && rng.gen_bool(0.5) {
            copy
        } else {
            c.state
        };
        Rhs::Call(Call {
            state,
            child: c.child,
            args: c.args.clone(),
        })
    };
    for r in m.rules() {
        let rhs = r.rhs.map_calls(&mut |c: &Call| redirect(c, rng));
        out.add_rule(r.state, r.symbol, rhs);
    }
    for r in m.rules().iter().filter(|r| r.state == target) {
        let rhs = r.rhs.map_calls(&mut |c: &Call| redirect(c, rng));
        out.add_rule(copy, r.symbol, rhs);
    }
    let calls = a
        .calls
        .iter()
        .map(|c| AxiomCall {
            state: if c.state == target && rng.gen_bool(0.5) {
                copy
            } else {
                c.state
            },
            args: c.args.clone(),
        })
        .collect();
    (
        out,
        Axiom {
            pattern: a.pattern,
            calls,
        },
    )
}

fn replace_nth(rhs: &Rhs, n: &mut usize, with: &mut dyn FnMut(&Rhs) -> Rhs) -> Rhs {
    if *n == 0 {
        *n = usize::MAX;
        return with(rhs);
    }
    *n -= 1;
    match rhs {
        Rhs::Out(s, kids) => Rhs::Out(*s, kids.iter().map(|k| replace_nth(k, n, with)).collect()),
        other => other.clone(),
    }
}

/// A near-duplicate: one rule changed at one position. The result may or
/// may not be equivalent.
pub fn mutate(
    store: &mut TermStore,
    m: &Mtt,
    a: &Axiom,
    alph: &Alphabets,
    rng: &mut StdRng,
) -> (Mtt, Axiom) {
    let l = m.params;
    if rng.gen_bool(0.15) && l > 0 && !a.calls.is_empty() {
        let mut a2 = a.clone();
        let i = rng.gen_range(0..a2.calls.len());
        let j = rng.gen_range(0..l);
        a2.calls[i].args[j] = random_inner(store, rng, &alph.delta_i, &[], 2);
        return (m.clone(), a2);
    }
    let pick = rng.gen_range(0..m.rules().len());
    let n = m.states.len();
    let vars = store.param_vars(l, false);
    let mut idx = 0;
    let out = rebuild(m, &mut |_, f, rhs| {
        let me = idx;
        idx += 1;
        if me != pick {
            return rhs.clone();
        }
        let rank = store.sym(f).rank;
        let mut pos = rng.gen_range(0..rhs.size());
        replace_nth(rhs, &mut pos, &mut |old: &Rhs| match old {
            Rhs::Call(c) if l > 0 && rng.gen_bool(0.5) => {
                let mut c = c.clone();
                let j = rng.gen_range(0..l);
                c.args[j] = random_inner(store, rng, &alph.delta_i, &vars, 2);
                Rhs::Call(c)
            }
            _ => random_rhs(store, rng, alph, n, l, rank, 2),
        })
    });
    (out, a.clone())
}

/// An equivalent variant built from renaming, parameter permutation and
/// state duplication.
pub fn equivalent_variant(
    store: &mut TermStore,
    m: &Mtt,
    a: &Axiom,
    rng: &mut StdRng,
) -> (Mtt, Axiom) {
    let (mut m, mut a) = (m.clone(), a.clone());
    if rng.gen_bool(0.5) {
        (m, a) = duplicate_state(&m, &a, rng);
    }
    if rng.gen_bool(0.5) {
        (m, a) = permute_params(store, &m, &a, rng);
    }
    rename_states(&m, &a, rng)
}

/// Drops each rule with the given probability.
pub fn make_partial(m: &Mtt, rng: &mut StdRng, drop: f64) -> Mtt {
    let mut out = m.without_rules();
    for r in m.rules() {
        if !rng.gen_bool(drop) {
            out.add_rule(r.state, r.symbol, r.rhs.clone());
        }
    }
    out
}

/// A random automaton over `sigma` with one to three states. It may have
/// unproductive states; analyze it before use.
pub fn random_dta(store: &TermStore, rng: &mut StdRng, sigma: &[SymId]) -> Dta {
    let n = rng.gen_range(1..=3);
    let mut trans = BTreeMap::new();
    for b in 0..n {
        for &f in sigma {
            if rng.gen_bool(0.75) {
                let kids = (0..store.sym(f).rank)
                    .map(|_| DState(rng.gen_range(0..n) as u32))
                    .collect();
                trans.insert((DState(b as u32), f), kids);
            }
        }
    }
    Dta {
        states: (0..n).map(|i| format!("d{i}")).collect(),
        sigma: sigma.to_vec(),
        init: DState(0),
        trans,
        witnesses: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, Mode};

    #[test]
    fn generated_transducers_are_valid_and_total() {
        let mut r = rng(7);
        for _ in 0..50 {
            let mut s = TermStore::new();
            let alph = random_alphabets(&mut s, &mut r);
            let (m, a) = random_mtt(&mut s, &mut r, &alph, Shape::default());
            assert!(validate(&s, &m, Mode::Total).is_ok());
            assert!(crate::model::validate_axiom(&s, &m, &a).is_ok());
            let (m2, a2) = equivalent_variant(&mut s, &m, &a, &mut r);
            assert!(
                validate(&s, &m2, Mode::Total).is_ok(),
                "{}",
                validate(&s, &m2, Mode::Total)
            );
            assert!(crate::model::validate_axiom(&s, &m2, &a2).is_ok());
            let (m3, a3) = mutate(&mut s, &m, &a, &alph, &mut r);
            assert!(validate(&s, &m3, Mode::Total).is_ok());
            assert!(crate::model::validate_axiom(&s, &m3, &a3).is_ok());
        }
    }

    #[test]
    fn seed_is_reproducible() {
        let build = |seed| {
            let mut s = TermStore::new();
            let mut r = rng(seed);
            let alph = random_alphabets(&mut s, &mut r);
            let (m, a) = random_mtt(&mut s, &mut r, &alph, Shape::default());
            crate::syntax::render_mtt(&s, &m, Some(&a))
        };
        assert_eq!(build(11), build(11));
    }
}
