//! Ranked symbols, a hash-consed term store and the pattern lattice.
//!
//! Every tree handled by the crate lives in one [`TermStore`]. Nodes are
//! interned, so two structurally identical trees always receive the same
//! [`TermId`] and equality of trees is a handle comparison. Trees that share
//! subtrees are stored as DAGs; all traversals in this module memoize on
//! handles so that their cost is linear in the number of distinct nodes.
//!
//! Patterns are trees over output symbols and the distinguished `⊤` leaf,
//! extended by an artificial least element [`Pattern::Bottom`].

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// The alphabet a symbol belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymbolClass {
    /// Input alphabet of transducers and automata.
    Input,
    /// Output symbols produced at state-output positions.
    Output,
    /// Output symbols produced inside parameter positions.
    Inner,
    /// Herbrand variables: the fresh `z`, parameters `y_j` and primed `y'_j`.
    Var,
    /// The pattern hole `⊤`.
    Top,
}

impl fmt::Display for SymbolClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SymbolClass::Input => "input",
            SymbolClass::Output => "state-output",
            SymbolClass::Inner => "parameter-output",
            SymbolClass::Var => "variable",
            SymbolClass::Top => "top",
        };
        f.write_str(s)
    }
}

/// A variable of a Herbrand conjunction.
///
/// The derived order is the canonical one: `z < y1 < … < yl < y'1 < … < y'l`.
/// Indices are 1-based, matching the rule syntax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Z,
    Y(u32),
    YPrime(u32),
}

impl Var {
    pub fn param(index: usize, primed: bool) -> Var {
        let i = index as u32;
        if primed {
            Var::YPrime(i)
        } else {
            Var::Y(i)
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Z => f.write_str("$z"),
            Var::Y(j) => write!(f, "y{j}"),
            Var::YPrime(j) => write!(f, "y{j}'"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymId(u32);

impl SymId {
    pub const MIN: SymId = SymId(0);
    pub const MAX: SymId = SymId(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbol {
    pub name: String,
    pub rank: usize,
    pub class: SymbolClass,
    pub var: Option<Var>,
}

/// Handle of an interned tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TermId(u32);

impl TermId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Node {
    sym: SymId,
    children: Box<[TermId]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("symbol `{name}` has rank {expected} but was given {found} children")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("{class} symbol `{name}` redeclared with rank {found} (previously {expected})")]
    RankConflict {
        name: String,
        class: SymbolClass,
        expected: usize,
        found: usize,
    },
    #[error("pattern has {expected} ⊤ leaves but {found} fills were supplied")]
    FillCount { expected: usize, found: usize },
    #[error("cannot substitute into the bottom pattern")]
    BottomSubstitution,
}

/// Append-only store of symbols and hash-consed tree nodes.
#[derive(Debug, Default, Clone)]
pub struct TermStore {
    symbols: Vec<Symbol>,
    symbol_index: HashMap<(SymbolClass, String), SymId>,
    nodes: Vec<Node>,
    node_index: HashMap<Node, TermId>,
}

impl TermStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of distinct nodes interned so far.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Declares (or looks up) a symbol. Names are unique within a class.
    pub fn symbol(
        &mut self,
        name: &str,
        rank: usize,
        class: SymbolClass,
    ) -> Result<SymId, TermError> {
        if let Some(&id) = self.symbol_index.get(&(class, name.to_string())) {
            let existing = &self.symbols[id.index()];
            if existing.rank != rank {
                return Err(TermError::RankConflict {
                    name: name.to_string(),
                    class,
                    expected: existing.rank,
                    found: rank,
                });
            }
            return Ok(id);
        }
        Ok(self.push_symbol(Symbol {
            name: name.to_string(),
            rank,
            class,
            var: None,
        }))
    }

    fn push_symbol(&mut self, symbol: Symbol) -> SymId {
        let id = SymId(self.symbols.len() as u32);
        self.symbol_index
            .insert((symbol.class, symbol.name.clone()), id);
        self.symbols.push(symbol);
        id
    }

    pub fn lookup(&self, class: SymbolClass, name: &str) -> Option<SymId> {
        self.symbol_index.get(&(class, name.to_string())).copied()
    }

    pub fn sym(&self, id: SymId) -> &Symbol {
        &self.symbols[id.index()]
    }

    pub fn sym_name(&self, id: SymId) -> &str {
        &self.symbols[id.index()].name
    }

    /// Interns `symbol(children…)`, checking the arity.
    pub fn intern(&mut self, sym: SymId, children: &[TermId]) -> Result<TermId, TermError> {
        let s = &self.symbols[sym.index()];
        if s.rank != children.len() {
            return Err(TermError::Arity {
                name: s.name.clone(),
                expected: s.rank,
                found: children.len(),
            });
        }
        Ok(self.app(sym, children))
    }

    /// Interns without the arity check; callers guarantee well-formedness.
    pub(crate) fn app(&mut self, sym: SymId, children: &[TermId]) -> TermId {
        debug_assert_eq!(self.symbols[sym.index()].rank, children.len());
        let node = Node {
            sym,
            children: children.into(),
        };
        if let Some(&id) = self.node_index.get(&node) {
            return id;
        }
        let id = TermId(self.nodes.len() as u32);
        self.nodes.push(node.clone());
        self.node_index.insert(node, id);
        id
    }

    pub fn leaf(&mut self, sym: SymId) -> TermId {
        self.app(sym, &[])
    }

    /// The pattern hole `⊤`.
    pub fn top(&mut self) -> TermId {
        let sym = match self.lookup(SymbolClass::Top, "⊤") {
            Some(s) => s,
            None => self.push_symbol(Symbol {
                name: "⊤".into(),
                rank: 0,
                class: SymbolClass::Top,
                var: None,
            }),
        };
        self.app(sym, &[])
    }

    pub fn var(&mut self, v: Var) -> TermId {
        let name = v.to_string();
        let sym = match self.lookup(SymbolClass::Var, &name) {
            Some(s) => s,
            None => self.push_symbol(Symbol {
                name,
                rank: 0,
                class: SymbolClass::Var,
                var: Some(v),
            }),
        };
        self.app(sym, &[])
    }

    /// The variable vector `(y1, …, yl)` or its primed copy.
    pub fn param_vars(&mut self, l: usize, primed: bool) -> Vec<TermId> {
        (1..=l).map(|j| self.var(Var::param(j, primed))).collect()
    }

    pub fn head(&self, t: TermId) -> SymId {
        self.nodes[t.index()].sym
    }

    pub fn children(&self, t: TermId) -> &[TermId] {
        &self.nodes[t.index()].children
    }

    pub fn class_of(&self, t: TermId) -> SymbolClass {
        self.symbols[self.head(t).index()].class
    }

    pub fn as_var(&self, t: TermId) -> Option<Var> {
        self.symbols[self.head(t).index()].var
    }

    pub fn is_top(&self, t: TermId) -> bool {
        self.class_of(t) == SymbolClass::Top
    }

    /// Height counting nodes on the longest root-to-leaf path (a leaf has height 1).
    pub fn height(&self, t: TermId) -> usize {
        let mut memo = HashMap::new();
        self.height_memo(t, &mut memo)
    }

    fn height_memo(&self, t: TermId, memo: &mut HashMap<TermId, usize>) -> usize {
        if let Some(&h) = memo.get(&t) {
            return h;
        }
        let h = 1 + self
            .children(t)
            .iter()
            .map(|&c| self.height_memo(c, memo))
            .max()
            .unwrap_or(0);
        memo.insert(t, h);
        h
    }

    /// Number of distinct nodes reachable from `t`.
    pub fn dag_size(&self, t: TermId) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![t];
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend_from_slice(self.children(n));
            }
        }
        seen.len()
    }

    /// Whether any node of `t` satisfies `pred` (memoized over the DAG).
    pub fn any_node(&self, t: TermId, pred: &mut dyn FnMut(&Symbol) -> bool) -> bool {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![t];
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            if pred(self.sym(self.head(n))) {
                return true;
            }
            stack.extend_from_slice(self.children(n));
        }
        false
    }

    pub fn vars_of(&self, t: TermId) -> Vec<Var> {
        let mut seen = std::collections::HashSet::new();
        let mut vars = std::collections::BTreeSet::new();
        let mut stack = vec![t];
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            if let Some(v) = self.as_var(n) {
                vars.insert(v);
            }
            stack.extend_from_slice(self.children(n));
        }
        vars.into_iter().collect()
    }

    pub fn contains_var(&self, t: TermId, v: Var) -> bool {
        self.any_node(t, &mut |s| s.var == Some(v))
    }

    /// Simultaneous substitution of variables, memoized over the DAG.
    pub fn substitute(&mut self, t: TermId, map: &HashMap<Var, TermId>) -> TermId {
        if map.is_empty() {
            return t;
        }
        let mut memo = HashMap::new();
        self.substitute_memo(t, map, &mut memo)
    }

    pub(crate) fn substitute_memo(
        &mut self,
        t: TermId,
        map: &HashMap<Var, TermId>,
        memo: &mut HashMap<TermId, TermId>,
    ) -> TermId {
        if let Some(&r) = memo.get(&t) {
            return r;
        }
        let r = if let Some(v) = self.as_var(t) {
            map.get(&v).copied().unwrap_or(t)
        } else if self.children(t).is_empty() {
            t
        } else {
            let sym = self.head(t);
            let kids: Vec<TermId> = self.children(t).to_vec();
            let new: Vec<TermId> = kids
                .iter()
                .map(|&c| self.substitute_memo(c, map, memo))
                .collect();
            if new == kids {
                t
            } else {
                self.app(sym, &new)
            }
        };
        memo.insert(t, r);
        r
    }

    /// Substitutes `y_j ↦ values[j-1]` (unprimed or primed).
    pub fn instantiate_params(&mut self, t: TermId, values: &[TermId], primed: bool) -> TermId {
        let map: HashMap<Var, TermId> = values
            .iter()
            .enumerate()
            .map(|(j, &v)| (Var::param(j + 1, primed), v))
            .collect();
        self.substitute(t, &map)
    }

    /// Renders a tree in the rule syntax, e.g. `+(*(1,EXP(3,z)),y1)`.
    pub fn render(&self, t: TermId) -> String {
        let mut out = String::new();
        self.render_into(t, &mut out);
        out
    }

    fn render_into(&self, t: TermId, out: &mut String) {
        let sym = self.sym(self.head(t));
        if matches!(sym.class, SymbolClass::Var | SymbolClass::Top) {
            out.push_str(&sym.name);
        } else {
            push_name(&sym.name, out);
        }
        let kids = self.children(t);
        if !kids.is_empty() {
            out.push('(');
            for (i, &c) in kids.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                self.render_into(c, out);
            }
            out.push(')');
        }
    }

    /// Preorder sequence of symbol names, used for deterministic orderings.
    pub fn preorder_names(&self, t: TermId) -> Vec<&str> {
        let mut out = Vec::new();
        let mut stack = vec![t];
        while let Some(n) = stack.pop() {
            out.push(self.sym_name(self.head(n)));
            stack.extend(self.children(n).iter().rev());
        }
        out
    }

    /// Compares two trees by their preorder name sequences.
    pub fn cmp_preorder(&self, a: TermId, b: TermId) -> std::cmp::Ordering {
        if a == b {
            return std::cmp::Ordering::Equal;
        }
        let mut sa = vec![a];
        let mut sb = vec![b];
        loop {
            match (sa.pop(), sb.pop()) {
                (None, None) => return std::cmp::Ordering::Equal,
                (None, Some(_)) => return std::cmp::Ordering::Less,
                (Some(_), None) => return std::cmp::Ordering::Greater,
                (Some(x), Some(y)) => {
                    if x == y {
                        continue;
                    }
                    let o = self.sym_name(self.head(x)).cmp(self.sym_name(self.head(y)));
                    if o != std::cmp::Ordering::Equal {
                        return o;
                    }
                    sa.extend(self.children(x).iter().rev());
                    sb.extend(self.children(y).iter().rev());
                }
            }
        }
    }

    /// Subtree at a Dewey path (1-based child indices).
    pub fn subterm_at(&self, t: TermId, path: &DeweyPath) -> Option<TermId> {
        let mut cur = t;
        for &i in &path.0 {
            cur = *self.children(cur).get(i.checked_sub(1)?)?;
        }
        Some(cur)
    }
}

/// Writes a symbol name, quoting it when it would not re-lex as one token.
pub(crate) fn push_name(name: &str, out: &mut String) {
    let plain = !name.is_empty()
        && name
            .chars()
            .all(|c| !c.is_whitespace() && !"(),={};#\"<>|/\\".contains(c))
        && !is_reserved_word(name);
    if plain {
        out.push_str(name);
    } else {
        out.push('"');
        for c in name.chars() {
            if c == '"' || c == '\\' {
                out.push('\\');
            }
            out.push(c);
        }
        out.push('"');
    }
}

const KEYWORDS: &[&str] = &[
    "sigma",
    "delta_o",
    "delta_i",
    "params",
    "state",
    "rule",
    "axiom",
    "dta",
    "lookahead",
    "where",
    "in",
    "states",
    "init",
    "trans",
];

/// Keywords and the variable names `x1…`, `y1…` must be quoted to be read as symbols.
pub(crate) fn is_reserved_word(name: &str) -> bool {
    if KEYWORDS.contains(&name) {
        return true;
    }
    let mut chars = name.chars();
    matches!(chars.next(), Some('x' | 'y')) && name.len() > 1 && chars.all(|c| c.is_ascii_digit())
}

/// A node position: the sequence of 1-based child indices from the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DeweyPath(pub Vec<usize>);

impl DeweyPath {
    pub fn root() -> Self {
        DeweyPath(Vec::new())
    }

    pub fn child(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        DeweyPath(v)
    }
}

impl fmt::Display for DeweyPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join("."))
    }
}

/// Element of the pattern lattice: a tree over output symbols and `⊤`, or `⊥`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    Bottom,
    Tree(TermId),
}

impl TermStore {
    pub fn top_pattern(&mut self) -> Pattern {
        Pattern::Tree(self.top())
    }

    pub fn render_pattern(&self, p: Pattern) -> String {
        match p {
            Pattern::Bottom => "⊥".to_string(),
            Pattern::Tree(t) => self.render(t),
        }
    }

    /// `p ⊑ p2`: `p` is an instance of `p2`, or `p` is `⊥`.
    pub fn pattern_leq(&self, p: Pattern, p2: Pattern) -> bool {
        match (p, p2) {
            (Pattern::Bottom, _) => true,
            (_, Pattern::Bottom) => false,
            (Pattern::Tree(a), Pattern::Tree(b)) => self.tree_leq(a, b),
        }
    }

    fn tree_leq(&self, a: TermId, b: TermId) -> bool {
        if a == b || self.is_top(b) {
            return true;
        }
        if self.head(a) != self.head(b) {
            return false;
        }
        self.children(a)
            .iter()
            .zip(self.children(b))
            .all(|(&x, &y)| self.tree_leq(x, y))
    }

    /// Least upper bound: the longest common prefix, `⊤` wherever the inputs differ.
    pub fn pattern_join(&mut self, p: Pattern, p2: Pattern) -> Pattern {
        match (p, p2) {
            (Pattern::Bottom, q) | (q, Pattern::Bottom) => q,
            (Pattern::Tree(a), Pattern::Tree(b)) => Pattern::Tree(self.tree_join(a, b)),
        }
    }

    fn tree_join(&mut self, a: TermId, b: TermId) -> TermId {
        if a == b {
            return a;
        }
        if self.is_top(a) || self.is_top(b) || self.head(a) != self.head(b) {
            return self.top();
        }
        let sym = self.head(a);
        let pairs: Vec<(TermId, TermId)> = self
            .children(a)
            .iter()
            .copied()
            .zip(self.children(b).iter().copied())
            .collect();
        let kids: Vec<TermId> = pairs
            .into_iter()
            .map(|(x, y)| self.tree_join(x, y))
            .collect();
        self.app(sym, &kids)
    }

    /// Number of `⊤` leaves of a tree.
    pub fn count_tops(&self, t: TermId) -> usize {
        let mut memo = HashMap::new();
        self.count_tops_memo(t, &mut memo)
    }

    fn count_tops_memo(&self, t: TermId, memo: &mut HashMap<TermId, usize>) -> usize {
        if let Some(&n) = memo.get(&t) {
            return n;
        }
        let n = if self.is_top(t) {
            1
        } else {
            self.children(t)
                .iter()
                .map(|&c| self.count_tops_memo(c, memo))
                .sum()
        };
        memo.insert(t, n);
        n
    }

    /// Positions of `⊤` leaves, left to right.
    pub fn top_positions(&self, t: TermId) -> Vec<DeweyPath> {
        let mut out = Vec::new();
        self.collect_tops(t, DeweyPath::root(), &mut out);
        out
    }

    fn collect_tops(&self, t: TermId, at: DeweyPath, out: &mut Vec<DeweyPath>) {
        if self.is_top(t) {
            out.push(at);
            return;
        }
        for (i, &c) in self.children(t).iter().enumerate() {
            self.collect_tops(c, at.child(i + 1), out);
        }
    }

    /// `p[fills…]`: replaces the i-th `⊤` (left to right) by `fills[i]`.
    pub fn pattern_substitute(
        &mut self,
        p: Pattern,
        fills: &[Pattern],
    ) -> Result<Pattern, TermError> {
        let Pattern::Tree(t) = p else {
            return Err(TermError::BottomSubstitution);
        };
        let expected = self.count_tops(t);
        if expected != fills.len() {
            return Err(TermError::FillCount {
                expected,
                found: fills.len(),
            });
        }
        if fills.contains(&Pattern::Bottom) {
            return Ok(Pattern::Bottom);
        }
        let trees: Vec<TermId> = fills
            .iter()
            .map(|f| match f {
                Pattern::Tree(t) => *t,
                Pattern::Bottom => unreachable!(),
            })
            .collect();
        Ok(Pattern::Tree(self.fill_tops(t, &trees)))
    }

    /// Replaces the `⊤` leaves of `t` by `fills` in order. Panics on a count mismatch.
    pub fn fill_tops(&mut self, t: TermId, fills: &[TermId]) -> TermId {
        let mut next = 0;
        let r = self.fill_tops_rec(t, fills, &mut next);
        assert_eq!(next, fills.len(), "fill count mismatch");
        r
    }

    fn fill_tops_rec(&mut self, t: TermId, fills: &[TermId], next: &mut usize) -> TermId {
        if self.is_top(t) {
            let r = fills[*next];
            *next += 1;
            return r;
        }
        if self.children(t).is_empty() {
            return t;
        }
        let sym = self.head(t);
        let kids: Vec<TermId> = self.children(t).to_vec();
        let new: Vec<TermId> = kids
            .into_iter()
            .map(|c| self.fill_tops_rec(c, fills, next))
            .collect();
        self.app(sym, &new)
    }

    /// Splits `t` into its maximal top part over state-output symbols and the
    /// residual subtrees, whose roots are not state-output symbols.
    pub fn prefix_decompose(&mut self, t: TermId) -> (Pattern, Vec<TermId>) {
        let mut residuals = Vec::new();
        let p = self.prefix_rec(t, &mut residuals);
        (Pattern::Tree(p), residuals)
    }

    /// The state-output prefix of `t` alone.
    pub fn output_prefix(&mut self, t: TermId) -> Pattern {
        self.prefix_decompose(t).0
    }

    fn prefix_rec(&mut self, t: TermId, residuals: &mut Vec<TermId>) -> TermId {
        if self.class_of(t) != SymbolClass::Output {
            residuals.push(t);
            return self.top();
        }
        let sym = self.head(t);
        let kids: Vec<TermId> = self.children(t).to_vec();
        let new: Vec<TermId> = kids
            .into_iter()
            .map(|c| self.prefix_rec(c, residuals))
            .collect();
        self.app(sym, &new)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixture {
        store: TermStore,
        star: SymId,
        exp: SymId,
        digits: [SymId; 4],
        plus: SymId,
    }

    fn fixture() -> Fixture {
        let mut store = TermStore::new();
        let star = store.symbol("*", 2, SymbolClass::Output).unwrap();
        let exp = store.symbol("EXP", 2, SymbolClass::Output).unwrap();
        let plus = store.symbol("+", 2, SymbolClass::Output).unwrap();
        let digits = [
            store.symbol("0", 0, SymbolClass::Output).unwrap(),
            store.symbol("1", 0, SymbolClass::Output).unwrap(),
            store.symbol("2", 0, SymbolClass::Output).unwrap(),
            store.symbol("3", 0, SymbolClass::Output).unwrap(),
        ];
        Fixture {
            store,
            star,
            exp,
            digits,
            plus,
        }
    }

    impl Fixture {
        /// `*(d, EXP(3, ⊤))`, or `*(⊤, EXP(3, ⊤))` for `None`.
        fn term_digit(&mut self, d: Option<usize>) -> TermId {
            let s = &mut self.store;
            let first = match d {
                Some(i) => s.leaf(self.digits[i]),
                None => s.top(),
            };
            let three = s.leaf(self.digits[3]);
            let top = s.top();
            let e = s.app(self.exp, &[three, top]);
            s.app(self.star, &[first, e])
        }
    }

    #[test]
    fn interning_is_structural() {
        let mut s = TermStore::new();
        let a = s.symbol("a", 0, SymbolClass::Inner).unwrap();
        let f = s.symbol("f", 2, SymbolClass::Inner).unwrap();
        let t1 = s.intern(a, &[]).unwrap();
        let t2 = s.intern(a, &[]).unwrap();
        assert_eq!(t1, t2);
        let before = s.len();
        let ft = s.intern(f, &[t1, t1]).unwrap();
        assert_eq!(s.len(), before + 1);
        assert_eq!(s.intern(f, &[t2, t2]).unwrap(), ft);
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let mut s = TermStore::new();
        let f = s.symbol("f", 2, SymbolClass::Inner).unwrap();
        let a = s.symbol("a", 0, SymbolClass::Inner).unwrap();
        let ta = s.leaf(a);
        assert!(matches!(
            s.intern(f, &[ta]),
            Err(TermError::Arity {
                expected: 2,
                found: 1,
                ..
            })
        ));
    }

    #[test]
    fn same_name_in_distinct_classes() {
        let mut s = TermStore::new();
        let a = s.symbol("0", 0, SymbolClass::Input).unwrap();
        let b = s.symbol("0", 0, SymbolClass::Output).unwrap();
        assert_ne!(a, b);
        assert!(s.symbol("0", 1, SymbolClass::Output).is_err());
    }

    #[test]
    fn doubling_chain_is_shared() {
        let mut s = TermStore::new();
        let a = s.symbol("a", 0, SymbolClass::Inner).unwrap();
        let f = s.symbol("f", 2, SymbolClass::Inner).unwrap();
        let base = s.len();
        let mut t = s.leaf(a);
        for _ in 1..10 {
            t = s.intern(f, &[t, t]).unwrap();
        }
        assert_eq!(s.len() - base, 10);
        assert_eq!(s.height(t), 10);
    }

    #[test]
    fn top_is_largest() {
        let mut fx = fixture();
        let p = fx.term_digit(None);
        let top = fx.store.top_pattern();
        assert!(fx.store.pattern_leq(Pattern::Tree(p), top));
        assert!(!fx.store.pattern_leq(top, Pattern::Tree(p)));
        assert!(fx.store.pattern_leq(Pattern::Bottom, Pattern::Tree(p)));
        assert!(!fx.store.pattern_leq(Pattern::Tree(p), Pattern::Bottom));
    }

    #[test]
    fn join_generalizes_differing_positions() {
        let mut fx = fixture();
        let p0 = fx.term_digit(Some(0));
        let p1 = fx.term_digit(Some(1));
        let expected = fx.term_digit(None);
        let j = fx.store.pattern_join(Pattern::Tree(p0), Pattern::Tree(p1));
        assert_eq!(j, Pattern::Tree(expected));
        assert_eq!(fx.store.render_pattern(j), "*(⊤,EXP(3,⊤))");
        let same = fx.store.pattern_join(Pattern::Tree(p0), Pattern::Tree(p0));
        assert_eq!(same, Pattern::Tree(p0));
    }

    #[test]
    fn join_over_the_three_digit_outputs() {
        let mut fx = fixture();
        let mut acc = Pattern::Bottom;
        for i in 0..3 {
            let p = fx.term_digit(Some(i));
            acc = fx.store.pattern_join(acc, Pattern::Tree(p));
        }
        let expected = fx.term_digit(None);
        assert_eq!(acc, Pattern::Tree(expected));
    }

    #[test]
    fn substitution_fills_left_to_right() {
        let mut fx = fixture();
        let p = fx.term_digit(None);
        let zero = fx.store.leaf(fx.digits[0]);
        let top = fx.store.top_pattern();
        let r = fx
            .store
            .pattern_substitute(Pattern::Tree(p), &[Pattern::Tree(zero), top])
            .unwrap();
        let expected = fx.term_digit(Some(0));
        assert_eq!(r, Pattern::Tree(expected));
        // unit and identity fill
        let r = fx
            .store
            .pattern_substitute(top, &[Pattern::Tree(p)])
            .unwrap();
        assert_eq!(r, Pattern::Tree(p));
        let r = fx
            .store
            .pattern_substitute(Pattern::Tree(p), &[top, top])
            .unwrap();
        assert_eq!(r, Pattern::Tree(p));
        assert!(matches!(
            fx.store.pattern_substitute(Pattern::Tree(p), &[top]),
            Err(TermError::FillCount {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn decompose_stops_at_non_output_roots() {
        let mut fx = fixture();
        let s = &mut fx.store;
        let g = s.symbol("g", 1, SymbolClass::Output).unwrap();
        let y1 = s.var(Var::Y(1));
        let gy = s.app(g, &[y1]);
        let (p, res) = s.prefix_decompose(gy);
        assert_eq!(s.render_pattern(p), "g(⊤)");
        assert_eq!(res, vec![y1]);
        let (p, res) = s.prefix_decompose(y1);
        assert_eq!(p, s.top_pattern());
        assert_eq!(res, vec![y1]);
        let pl = s.app(fx.plus, &[gy, y1]);
        let (p, res) = s.prefix_decompose(pl);
        assert_eq!(s.render_pattern(p), "+(g(⊤),⊤)");
        assert_eq!(res, vec![y1, y1]);
    }

    #[test]
    fn top_positions_are_preorder() {
        let mut fx = fixture();
        let p = fx.term_digit(None);
        let pos: Vec<String> = fx
            .store
            .top_positions(p)
            .iter()
            .map(|d| d.to_string())
            .collect();
        assert_eq!(pos, vec!["1", "2.2"]);
        let top = fx.store.top();
        assert_eq!(fx.store.top_positions(top)[0].to_string(), "ε");
    }

    #[test]
    fn render_quotes_delimiters() {
        let mut s = TermStore::new();
        let a = s.symbol("a b", 0, SymbolClass::Inner).unwrap();
        let t = s.leaf(a);
        assert_eq!(s.render(t), "\"a b\"");
    }
}
