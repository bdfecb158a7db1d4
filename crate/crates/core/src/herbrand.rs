//! Conjunctions of Herbrand equalities in solved form.
//!
//! A satisfiable conjunction is kept as an idempotent substitution: every
//! bound variable maps to a term that mentions only unbound variables.
//! Variables that are only equated with other variables map to the least
//! variable of their class, so two equivalent conjunctions always have the
//! same map and equivalence is map equality.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::terms::{TermId, TermStore, Var};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Conjunction {
    False,
    Subst(BTreeMap<Var, TermId>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HerbrandError {
    #[error("no value given for variable {0}")]
    Uncovered(Var),
}

impl Conjunction {
    pub fn truth() -> Self {
        Conjunction::Subst(BTreeMap::new())
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Conjunction::False)
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Conjunction::Subst(m) if m.is_empty())
    }

    pub fn bindings(&self) -> Option<&BTreeMap<Var, TermId>> {
        match self {
            Conjunction::False => None,
            Conjunction::Subst(m) => Some(m),
        }
    }

    /// The bindings as equations.
    pub fn equations(&self, store: &mut TermStore) -> Vec<(TermId, TermId)> {
        match self {
            Conjunction::False => Vec::new(),
            Conjunction::Subst(m) => m.iter().map(|(&v, &t)| (store.var(v), t)).collect(),
        }
    }

    pub fn render(&self, store: &TermStore) -> String {
        match self {
            Conjunction::False => "false".into(),
            Conjunction::Subst(m) if m.is_empty() => "true".into(),
            Conjunction::Subst(m) => m
                .iter()
                .map(|(v, &t)| format!("{v} = {}", store.render(t)))
                .collect::<Vec<_>>()
                .join(" & "),
        }
    }

    /// Bindings as `(variable, rendered term)` pairs, for structured output.
    pub fn to_pairs(&self, store: &TermStore) -> Option<Vec<(String, String)>> {
        self.bindings().map(|m| {
            m.iter()
                .map(|(v, &t)| (v.to_string(), store.render(t)))
                .collect()
        })
    }
}

/// Union-find over term nodes; classes remember one non-variable member.
struct Unifier {
    parent: HashMap<TermId, TermId>,
    term: HashMap<TermId, TermId>,
    least_var: HashMap<TermId, Var>,
    vars: BTreeSet<Var>,
}

impl Unifier {
    fn new() -> Self {
        Unifier {
            parent: HashMap::new(),
            term: HashMap::new(),
            least_var: HashMap::new(),
            vars: BTreeSet::new(),
        }
    }

    fn find(&mut self, t: TermId) -> TermId {
        let mut root = t;
        while let Some(&p) = self.parent.get(&root) {
            if p == root {
                break;
            }
            root = p;
        }
        let mut cur = t;
        while cur != root {
            let next = self.parent[&cur];
            self.parent.insert(cur, root);
            cur = next;
        }
        root
    }

    fn register(&mut self, store: &TermStore, t: TermId) {
        if self.parent.contains_key(&t) {
            return;
        }
        self.parent.insert(t, t);
        match store.as_var(t) {
            Some(v) => {
                self.least_var.insert(t, v);
                self.vars.insert(v);
            }
            None => {
                self.term.insert(t, t);
            }
        }
    }

    /// Merges the classes of the two roots; returns child pairs to unify,
    /// or `None` on a constructor clash.
    fn union(&mut self, store: &TermStore, a: TermId, b: TermId) -> Option<Vec<(TermId, TermId)>> {
        let ta = self.term.get(&a).copied();
        let tb = self.term.get(&b).copied();
        let mut pending = Vec::new();
        if let (Some(x), Some(y)) = (ta, tb) {
            if store.head(x) != store.head(y) {
                return None;
            }
            pending.extend(
                store
                    .children(x)
                    .iter()
                    .copied()
                    .zip(store.children(y).iter().copied()),
            );
        }
        self.parent.insert(b, a);
        if ta.is_none() {
            if let Some(y) = tb {
                self.term.insert(a, y);
            }
        }
        self.term.remove(&b);
        if let Some(vb) = self.least_var.remove(&b) {
            let keep = self.least_var.get(&a).map_or(vb, |&va| va.min(vb));
            self.least_var.insert(a, keep);
        }
        Some(pending)
    }

    fn solve(&mut self, store: &TermStore, eqs: &[(TermId, TermId)]) -> bool {
        let mut stack: Vec<(TermId, TermId)> = eqs.to_vec();
        while let Some((s, t)) = stack.pop() {
            self.register(store, s);
            self.register(store, t);
            let (a, b) = (self.find(s), self.find(t));
            if a == b {
                continue;
            }
            match self.union(store, a, b) {
                None => return false,
                Some(kids) => stack.extend(kids),
            }
        }
        true
    }

    /// Fully resolved value of a class, or `None` on a cycle.
    fn resolve(
        &mut self,
        store: &mut TermStore,
        t: TermId,
        memo: &mut HashMap<TermId, Option<TermId>>,
        active: &mut BTreeSet<TermId>,
    ) -> Option<TermId> {
        if !self.parent.contains_key(&t) {
            return self.resolve_fresh(store, t, memo, active);
        }
        let root = self.find(t);
        if let Some(&r) = memo.get(&root) {
            return r;
        }
        let Some(&rep) = self.term.get(&root) else {
            let v = self.least_var[&root];
            let r = Some(store.var(v));
            memo.insert(root, r);
            return r;
        };
        if !active.insert(root) {
            return None;
        }
        let kids = store.children(rep).to_vec();
        let mut new = Vec::with_capacity(kids.len());
        let mut ok = true;
        for k in kids {
            match self.resolve(store, k, memo, active) {
                Some(x) => new.push(x),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        active.remove(&root);
        let r = ok.then(|| store.app(store.head(rep), &new));
        memo.insert(root, r);
        r
    }

    /// Subterms never touched by unification still may contain variables
    /// that were; rebuild them through their children.
    fn resolve_fresh(
        &mut self,
        store: &mut TermStore,
        t: TermId,
        memo: &mut HashMap<TermId, Option<TermId>>,
        active: &mut BTreeSet<TermId>,
    ) -> Option<TermId> {
        let kids = store.children(t).to_vec();
        if kids.is_empty() {
            return Some(t);
        }
        if let Some(&r) = memo.get(&t) {
            return r;
        }
        let mut new = Vec::with_capacity(kids.len());
        for k in kids {
            match self.resolve(store, k, memo, active) {
                Some(x) => new.push(x),
                None => {
                    memo.insert(t, None);
                    return None;
                }
            }
        }
        let r = Some(store.app(store.head(t), &new));
        memo.insert(t, r);
        r
    }
}

/// Most general unifier of the equations in canonical form.
pub fn reduce(store: &mut TermStore, eqs: &[(TermId, TermId)]) -> Conjunction {
    let mut u = Unifier::new();
    if !u.solve(store, eqs) {
        return Conjunction::False;
    }
    let mut memo = HashMap::new();
    let mut active = BTreeSet::new();
    let mut out = BTreeMap::new();
    let vars: Vec<Var> = u.vars.iter().copied().collect();
    for v in vars {
        let vt = store.var(v);
        let Some(img) = u.resolve(store, vt, &mut memo, &mut active) else {
            return Conjunction::False;
        };
        if img != vt {
            if store.contains_var(img, v) {
                return Conjunction::False;
            }
            out.insert(v, img);
        }
    }
    Conjunction::Subst(out)
}

pub fn conj_and(store: &mut TermStore, c1: &Conjunction, c2: &Conjunction) -> Conjunction {
    match (c1, c2) {
        (Conjunction::False, _) | (_, Conjunction::False) => Conjunction::False,
        (c, d) if d.is_true() => c.clone(),
        (c, d) if c.is_true() => d.clone(),
        _ => {
            let mut eqs = c1.equations(store);
            eqs.extend(c2.equations(store));
            reduce(store, &eqs)
        }
    }
}

/// Conjunction of many conjunctions, stopping early at `False`.
pub fn conj_all(store: &mut TermStore, parts: &[Conjunction]) -> Conjunction {
    let mut eqs = Vec::new();
    for c in parts {
        match c {
            Conjunction::False => return Conjunction::False,
            c => eqs.extend(c.equations(store)),
        }
    }
    reduce(store, &eqs)
}

/// `c[σ]`: applies the assignment to both sides of every binding.
pub fn subst(
    store: &mut TermStore,
    c: &Conjunction,
    assignment: &HashMap<Var, TermId>,
) -> Conjunction {
    match c {
        Conjunction::False => Conjunction::False,
        Conjunction::Subst(m) if assignment.is_empty() || m.is_empty() => c.clone(),
        Conjunction::Subst(m) => {
            let mut memo = HashMap::new();
            let mut eqs = Vec::with_capacity(m.len());
            for (&v, &t) in m {
                let vt = store.var(v);
                let l = store.substitute_memo(vt, assignment, &mut memo);
                let r = store.substitute_memo(t, assignment, &mut memo);
                eqs.push((l, r));
            }
            reduce(store, &eqs)
        }
    }
}

pub fn conj_equiv(c1: &Conjunction, c2: &Conjunction) -> bool {
    c1 == c2
}

pub fn conj_implies(store: &mut TermStore, c1: &Conjunction, c2: &Conjunction) -> bool {
    match (c1, c2) {
        (Conjunction::False, _) => true,
        (_, Conjunction::False) => false,
        _ => conj_and(store, c1, c2) == *c1,
    }
}

/// Whether the conjunction holds under a ground assignment.
pub fn eval_ground(
    store: &mut TermStore,
    c: &Conjunction,
    assignment: &HashMap<Var, TermId>,
) -> Result<bool, HerbrandError> {
    let Conjunction::Subst(m) = c else {
        return Ok(false);
    };
    for (&v, &t) in m {
        for w in std::iter::once(v).chain(store.vars_of(t)) {
            if !assignment.contains_key(&w) {
                return Err(HerbrandError::Uncovered(w));
            }
        }
    }
    let mut memo = HashMap::new();
    for (&v, &t) in m {
        let l = assignment[&v];
        let r = store.substitute_memo(t, assignment, &mut memo);
        if l != r {
            return Ok(false);
        }
    }
    Ok(true)
}

pub struct Display<'a>(pub &'a Conjunction, pub &'a TermStore);

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.render(self.1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::{SymId, SymbolClass};

    struct Fx {
        s: TermStore,
        h: SymId,
        b: SymId,
        a: SymId,
        f: SymId,
    }

    fn fx() -> Fx {
        let mut s = TermStore::new();
        let h = s.symbol("h", 1, SymbolClass::Inner).unwrap();
        let b = s.symbol("b", 0, SymbolClass::Inner).unwrap();
        let a = s.symbol("a", 0, SymbolClass::Inner).unwrap();
        let f = s.symbol("f", 2, SymbolClass::Inner).unwrap();
        Fx { s, h, b, a, f }
    }

    #[test]
    fn worked_psi_reduction() {
        let mut x = fx();
        let z = x.s.var(Var::Z);
        let y1 = x.s.var(Var::Y(1));
        let y2 = x.s.var(Var::Y(2));
        let hy2 = x.s.app(x.h, &[y2]);
        let tb = x.s.leaf(x.b);
        let hb = x.s.app(x.h, &[tb]);
        let c = reduce(&mut x.s, &[(z, y1), (z, hy2), (z, hb)]);
        assert_eq!(c.render(&x.s), "$z = h(b) & y1 = h(b) & y2 = b");
    }

    #[test]
    fn trivial_and_cyclic() {
        let mut x = fx();
        let tb = x.s.leaf(x.b);
        assert!(reduce(&mut x.s, &[(tb, tb)]).is_true());
        let y1 = x.s.var(Var::Y(1));
        let fy = x.s.app(x.f, &[y1, tb]);
        assert!(reduce(&mut x.s, &[(y1, fy)]).is_false());
    }

    #[test]
    fn variable_bindings_point_to_least_variable() {
        let mut x = fx();
        let y1 = x.s.var(Var::Y(1));
        let yp2 = x.s.var(Var::YPrime(2));
        let c = reduce(&mut x.s, &[(y1, yp2)]);
        assert_eq!(c.render(&x.s), "y2' = y1");
        let d = reduce(&mut x.s, &[(yp2, y1)]);
        assert_eq!(c, d);
    }

    #[test]
    fn conjunction_clash_and_unit() {
        let mut x = fx();
        let y1 = x.s.var(Var::Y(1));
        let ta = x.s.leaf(x.a);
        let tb = x.s.leaf(x.b);
        let c1 = reduce(&mut x.s, &[(y1, ta)]);
        let c2 = reduce(&mut x.s, &[(y1, tb)]);
        assert!(conj_and(&mut x.s, &c1, &c2).is_false());
        assert_eq!(conj_and(&mut x.s, &Conjunction::truth(), &c1), c1);
    }

    #[test]
    fn conjunction_resolves_through_variables() {
        let mut x = fx();
        let z = x.s.var(Var::Z);
        let y1 = x.s.var(Var::Y(1));
        let y2 = x.s.var(Var::Y(2));
        let hy2 = x.s.app(x.h, &[y2]);
        let c1 = reduce(&mut x.s, &[(z, y1)]);
        let c2 = reduce(&mut x.s, &[(z, hy2)]);
        let c = conj_and(&mut x.s, &c1, &c2);
        assert_eq!(c.render(&x.s), "$z = h(y2) & y1 = h(y2)");
        assert_eq!(c, reduce(&mut x.s, &[(z, y1), (z, hy2)]));
    }

    #[test]
    fn substitution_rereduces() {
        let mut x = fx();
        let z = x.s.var(Var::Z);
        let y1 = x.s.var(Var::Y(1));
        let y2 = x.s.var(Var::Y(2));
        let hy2 = x.s.app(x.h, &[y2]);
        let tb = x.s.leaf(x.b);
        let c = reduce(&mut x.s, &[(z, y1)]);
        let sigma = HashMap::from([(Var::Y(1), hy2), (Var::Y(2), tb)]);
        let r = subst(&mut x.s, &c, &sigma);
        assert_eq!(r.render(&x.s), "$z = h(y2)");
        assert_eq!(subst(&mut x.s, &c, &HashMap::new()), c);
        assert!(subst(&mut x.s, &Conjunction::False, &sigma).is_false());
    }

    #[test]
    fn implication() {
        let mut x = fx();
        let y1 = x.s.var(Var::Y(1));
        let y2 = x.s.var(Var::Y(2));
        let ta = x.s.leaf(x.a);
        let tb = x.s.leaf(x.b);
        let big = reduce(&mut x.s, &[(y1, ta), (y2, tb)]);
        let small = reduce(&mut x.s, &[(y1, ta)]);
        assert!(conj_implies(&mut x.s, &big, &small));
        assert!(!conj_implies(&mut x.s, &Conjunction::truth(), &small));
        assert!(conj_implies(&mut x.s, &Conjunction::False, &small));
    }

    #[test]
    fn ground_evaluation() {
        let mut x = fx();
        let s1 = x.s.symbol("s", 1, SymbolClass::Inner).unwrap();
        let p1 = x.s.symbol("p", 1, SymbolClass::Inner).unwrap();
        let zc = x.s.symbol("z", 0, SymbolClass::Inner).unwrap();
        let y1 = x.s.var(Var::Y(1));
        let yp2 = x.s.var(Var::YPrime(2));
        let c = reduce(&mut x.s, &[(y1, yp2)]);
        let tz = x.s.leaf(zc);
        let sz = x.s.app(s1, &[tz]);
        let pz = x.s.app(p1, &[tz]);
        let ok = HashMap::from([(Var::Y(1), sz), (Var::YPrime(2), sz)]);
        let bad = HashMap::from([(Var::Y(1), sz), (Var::YPrime(2), pz)]);
        assert!(eval_ground(&mut x.s, &c, &ok).unwrap());
        assert!(!eval_ground(&mut x.s, &c, &bad).unwrap());
        let partial = HashMap::from([(Var::Y(1), sz)]);
        assert_eq!(
            eval_ground(&mut x.s, &c, &partial),
            Err(HerbrandError::Uncovered(Var::YPrime(2)))
        );
    }

    #[test]
    fn doubling_chain_stays_linear() {
        let mut x = fx();
        let n = 20;
        let vars: Vec<TermId> = (0..=n).map(|i| x.s.var(Var::Y(i as u32 + 1))).collect();
        let ta = x.s.leaf(x.a);
        let mut eqs = vec![(vars[0], ta)];
        for i in 1..=n {
            let t = x.s.app(x.f, &[vars[i - 1], vars[i - 1]]);
            eqs.push((vars[i], t));
        }
        let before = x.s.len();
        let c = reduce(&mut x.s, &eqs);
        assert!(x.s.len() - before <= 2 * n + 2);
        let last = c.bindings().unwrap()[&Var::Y(n as u32 + 1)];
        assert_eq!(x.s.height(last), n + 1);
        assert_eq!(x.s.dag_size(last), n + 1);
    }
}
