//! Transducers, axioms and top-down automata.
//!
//! An [`Mtt`] is a separated basic macro tree transducer: right-hand sides
//! are [`Rhs`] trees whose state calls carry parameter arguments as interned
//! terms over the inner alphabet and the parameter variables. Because call
//! arguments are plain [`TermId`]s, a call can never be nested inside another
//! call's argument, so basicness holds by construction; the parser rejects
//! nested calls before a transducer is built.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::terms::{DeweyPath, Pattern, SymId, SymbolClass, TermId, TermStore, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// State of a top-down tree automaton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DState(pub u32);

impl DState {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A state call `q(x_child, args…)`. `child` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Call {
    pub state: StateId,
    pub child: usize,
    pub args: Vec<TermId>,
}

/// Right-hand side of a rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Rhs {
    /// An output symbol applied to sub-right-hand sides.
    Out(SymId, Vec<Rhs>),
    /// The parameter `y_j` (1-based).
    Param(usize),
    Call(Call),
}

impl Rhs {
    pub fn size(&self) -> usize {
        match self {
            Rhs::Out(_, kids) => 1 + kids.iter().map(Rhs::size).sum::<usize>(),
            Rhs::Param(_) => 1,
            Rhs::Call(c) => 1 + c.args.len(),
        }
    }

    pub fn calls(&self) -> Vec<&Call> {
        let mut out = Vec::new();
        self.collect_calls(&mut out);
        out
    }

    fn collect_calls<'a>(&'a self, out: &mut Vec<&'a Call>) {
        match self {
            Rhs::Out(_, kids) => kids.iter().for_each(|k| k.collect_calls(out)),
            Rhs::Param(_) => {}
            Rhs::Call(c) => out.push(c),
        }
    }

    /// Rewrites every call with `f`.
    pub fn map_calls(&self, f: &mut dyn FnMut(&Call) -> Rhs) -> Rhs {
        match self {
            Rhs::Out(s, kids) => Rhs::Out(*s, kids.iter().map(|k| k.map_calls(f)).collect()),
            Rhs::Param(j) => Rhs::Param(*j),
            Rhs::Call(c) => f(c),
        }
    }
}

/// A leaf of a right-hand side below its maximal output-symbol top part.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Leaf {
    Param(usize),
    Call(Call),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub state: StateId,
    pub symbol: SymId,
    pub rhs: Rhs,
}

/// A separated basic macro tree transducer with a uniform parameter count.
#[derive(Debug, Clone, Default)]
pub struct Mtt {
    pub states: Vec<String>,
    pub sigma: Vec<SymId>,
    pub delta_o: Vec<SymId>,
    pub delta_i: Vec<SymId>,
    pub params: usize,
    rules: Vec<Rule>,
    index: HashMap<(StateId, SymId), usize>,
}

impl Mtt {
    pub fn new(sigma: Vec<SymId>, delta_o: Vec<SymId>, delta_i: Vec<SymId>, params: usize) -> Self {
        Mtt {
            sigma,
            delta_o,
            delta_i,
            params,
            ..Default::default()
        }
    }

    pub fn add_state(&mut self, name: &str) -> StateId {
        if let Some(q) = self.state_named(name) {
            return q;
        }
        self.states.push(name.to_string());
        StateId(self.states.len() as u32 - 1)
    }

    pub fn state_named(&self, name: &str) -> Option<StateId> {
        self.states
            .iter()
            .position(|s| s == name)
            .map(|i| StateId(i as u32))
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.states[q.index()]
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len() as u32).map(StateId)
    }

    /// Appends a rule. A second rule for the same `(state, symbol)` is kept
    /// (so validation can report it) but never used by lookups.
    pub fn add_rule(&mut self, state: StateId, symbol: SymId, rhs: Rhs) {
        self.index
            .entry((state, symbol))
            .or_insert(self.rules.len());
        self.rules.push(Rule { state, symbol, rhs });
    }

    pub fn rule(&self, state: StateId, symbol: SymId) -> Option<&Rhs> {
        self.index
            .get(&(state, symbol))
            .map(|&i| &self.rules[i].rhs)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn size(&self) -> usize {
        self.rules.iter().map(|r| 1 + r.rhs.size()).sum()
    }

    /// Drops all rules, keeping states and alphabets.
    pub fn without_rules(&self) -> Mtt {
        Mtt {
            states: self.states.clone(),
            sigma: self.sigma.clone(),
            delta_o: self.delta_o.clone(),
            delta_i: self.delta_i.clone(),
            params: self.params,
            rules: Vec::new(),
            index: HashMap::new(),
        }
    }
}

/// A call of the axiom; always applied to the root input `x1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AxiomCall {
    pub state: StateId,
    pub args: Vec<TermId>,
}

/// `p[q1(x1,T1), …, qm(x1,Tm)]` with ground parameter vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axiom {
    /// Pattern over state-output symbols and `⊤`, one `⊤` per call.
    pub pattern: TermId,
    pub calls: Vec<AxiomCall>,
}

/// Deterministic top-down tree automaton.
#[derive(Debug, Clone, Default)]
pub struct Dta {
    pub states: Vec<String>,
    pub sigma: Vec<SymId>,
    pub init: DState,
    pub trans: BTreeMap<(DState, SymId), Vec<DState>>,
    /// Minimal-height witness per state, filled by [`dta_analyze`].
    pub witnesses: Vec<Option<TermId>>,
}


impl Dta {
    /// The one-state automaton accepting every tree over `sigma`.
    pub fn trivial(store: &TermStore, sigma: &[SymId]) -> Dta {
        let mut trans = BTreeMap::new();
        for &f in sigma {
            trans.insert((DState(0), f), vec![DState(0); store.sym(f).rank]);
        }
        Dta {
            states: vec!["b".to_string()],
            sigma: sigma.to_vec(),
            init: DState(0),
            trans,
            witnesses: Vec::new(),
        }
    }

    pub fn state_named(&self, name: &str) -> Option<DState> {
        self.states
            .iter()
            .position(|s| s == name)
            .map(|i| DState(i as u32))
    }

    pub fn state_ids(&self) -> impl Iterator<Item = DState> {
        (0..self.states.len() as u32).map(DState)
    }

    pub fn transitions_from(&self, b: DState) -> impl Iterator<Item = (SymId, &[DState])> {
        self.trans
            .range((b, SymId::MIN)..=(b, SymId::MAX))
            .map(|((_, f), kids)| (*f, kids.as_slice()))
    }

    pub fn witness(&self, b: DState) -> Option<TermId> {
        self.witnesses.get(b.index()).copied().flatten()
    }

    /// Whether `t` is accepted from state `b`.
    pub fn accepts_from(&self, store: &TermStore, b: DState, t: TermId) -> bool {
        match self.trans.get(&(b, store.head(t))) {
            None => false,
            Some(kids) => kids
                .iter()
                .zip(store.children(t))
                .all(|(&bi, &ti)| self.accepts_from(store, bi, ti)),
        }
    }

    pub fn accepts(&self, store: &TermStore, t: TermId) -> bool {
        self.accepts_from(store, self.init, t)
    }
}

/// Maps transducer states to automaton states.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StateMap(pub Vec<DState>);

impl StateMap {
    pub fn get(&self, q: StateId) -> DState {
        self.0[q.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Total,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    Nondeterministic,
    MissingRule,
    NotSeparated,
    ParamOutOfRange,
    InputVarOutOfRange,
    CallArity,
    ForeignSymbol,
    AxiomNotGround,
    AxiomShape,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Issue {
    pub kind: IssueKind,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, kind: IssueKind, location: String, message: String) {
        self.issues.push(Issue {
            kind,
            location,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid transducer:\n{0}")]
    Invalid(ValidationReport),
    #[error("the automaton accepts no tree from its initial state")]
    EmptyDomain,
    #[error("state `{state}` has no rule for `{symbol}` although automaton state `{dta_state}` accepts it")]
    NotTotalRelative {
        state: String,
        symbol: String,
        dta_state: String,
    },
}

/// Checks determinism, totality (in total mode), separatedness and index ranges.
pub fn validate(store: &TermStore, m: &Mtt, mode: Mode) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen = BTreeSet::new();
    for (i, rule) in m.rules().iter().enumerate() {
        let loc = format!(
            "rule #{} {}({})",
            i + 1,
            m.state_name(rule.state),
            store.sym_name(rule.symbol)
        );
        if !seen.insert((rule.state, rule.symbol)) {
            report.push(
                IssueKind::Nondeterministic,
                loc.clone(),
                "second rule for the same state and input symbol".into(),
            );
        }
        if !m.sigma.contains(&rule.symbol) {
            report.push(
                IssueKind::ForeignSymbol,
                loc.clone(),
                format!("`{}` is not an input symbol", store.sym_name(rule.symbol)),
            );
            continue;
        }
        let rank = store.sym(rule.symbol).rank;
        check_rhs(store, m, &rule.rhs, rank, &loc, &mut report);
    }
    if mode == Mode::Total {
        for q in m.state_ids() {
            for &f in &m.sigma {
                if m.rule(q, f).is_none() {
                    report.push(
                        IssueKind::MissingRule,
                        format!("{}({})", m.state_name(q), store.sym_name(f)),
                        "no rule (transducer is not total)".into(),
                    );
                }
            }
        }
    }
    report
}

fn check_rhs(
    store: &TermStore,
    m: &Mtt,
    rhs: &Rhs,
    rank: usize,
    loc: &str,
    report: &mut ValidationReport,
) {
    match rhs {
        Rhs::Out(s, kids) => {
            let sym = store.sym(*s);
            if sym.class != SymbolClass::Output || !m.delta_o.contains(s) {
                report.push(
                    IssueKind::NotSeparated,
                    loc.to_string(),
                    format!(
                        "`{}` appears at a state-output position but is not a state-output symbol",
                        sym.name
                    ),
                );
            }
            for k in kids {
                check_rhs(store, m, k, rank, loc, report);
            }
        }
        Rhs::Param(j) => {
            if *j == 0 || *j > m.params {
                report.push(
                    IssueKind::ParamOutOfRange,
                    loc.to_string(),
                    format!("y{j} is out of range (params {})", m.params),
                );
            }
        }
        Rhs::Call(c) => {
            if c.child == 0 || c.child > rank {
                report.push(
                    IssueKind::InputVarOutOfRange,
                    loc.to_string(),
                    format!("x{} is out of range (input rank {rank})", c.child),
                );
            }
            if c.state.index() >= m.states.len() {
                report.push(
                    IssueKind::ForeignSymbol,
                    loc.to_string(),
                    "call to an undeclared state".into(),
                );
            }
            if c.args.len() != m.params {
                report.push(
                    IssueKind::CallArity,
                    loc.to_string(),
                    format!(
                        "call passes {} parameters, expected {}",
                        c.args.len(),
                        m.params
                    ),
                );
            }
            for &a in &c.args {
                check_arg(store, m, a, loc, report);
            }
        }
    }
}

fn check_arg(store: &TermStore, m: &Mtt, t: TermId, loc: &str, report: &mut ValidationReport) {
    let mut bad = Vec::new();
    store.any_node(t, &mut |s| {
        match s.class {
            SymbolClass::Var => match s.var {
                Some(Var::Y(j)) if j as usize >= 1 && j as usize <= m.params => {}
                _ => bad.push((
                    IssueKind::ParamOutOfRange,
                    format!("{} is out of range", s.name),
                )),
            },
            SymbolClass::Inner => {}
            _ => bad.push((
                IssueKind::NotSeparated,
                format!(
                    "`{}` appears inside a parameter argument but is not a parameter-output symbol",
                    s.name
                ),
            )),
        }
        false
    });
    store.any_node(t, &mut |s| {
        if s.class == SymbolClass::Inner {
            let id = store.lookup(SymbolClass::Inner, &s.name);
            if id.is_some_and(|id| !m.delta_i.contains(&id)) {
                bad.push((
                    IssueKind::ForeignSymbol,
                    format!("`{}` is not declared in the parameter alphabet", s.name),
                ));
            }
        }
        false
    });
    for (kind, msg) in bad {
        report.push(kind, loc.to_string(), msg);
    }
}

/// Checks an axiom against its transducer.
pub fn validate_axiom(store: &TermStore, m: &Mtt, a: &Axiom) -> ValidationReport {
    let mut report = ValidationReport::default();
    let tops = store.count_tops(a.pattern);
    if tops != a.calls.len() {
        report.push(
            IssueKind::AxiomShape,
            "axiom".into(),
            format!("pattern has {tops} holes but {} calls", a.calls.len()),
        );
    }
    let non_output = store.any_node(a.pattern, &mut |s| {
        !matches!(s.class, SymbolClass::Output | SymbolClass::Top)
    });
    if non_output {
        report.push(
            IssueKind::NotSeparated,
            "axiom".into(),
            "axiom pattern may only contain state-output symbols".into(),
        );
    }
    for (i, c) in a.calls.iter().enumerate() {
        let loc = format!("axiom call #{}", i + 1);
        if c.args.len() != m.params {
            report.push(
                IssueKind::CallArity,
                loc.clone(),
                format!(
                    "call passes {} parameters, expected {}",
                    c.args.len(),
                    m.params
                ),
            );
        }
        for &t in &c.args {
            if !store.vars_of(t).is_empty() {
                report.push(
                    IssueKind::AxiomNotGround,
                    loc.clone(),
                    "axiom parameters must be ground".into(),
                );
            }
            check_arg(store, m, t, &loc, &mut report);
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("state `{state}` has no rule for `{symbol}` at input position {path}")]
    NoRule {
        state: String,
        symbol: String,
        path: DeweyPath,
    },
}

/// Memoizing interpreter for one transducer.
///
/// The memo is keyed on (state, input node, parameter vector); inputs and
/// parameter values are DAG-shared so repeated subcomputations are free.
pub struct Evaluator<'m> {
    mtt: &'m Mtt,
    memo: HashMap<(StateId, TermId, Box<[TermId]>), TermId>,
}

impl<'m> Evaluator<'m> {
    pub fn new(mtt: &'m Mtt) -> Self {
        Evaluator {
            mtt,
            memo: HashMap::new(),
        }
    }

    pub fn state(
        &mut self,
        store: &mut TermStore,
        q: StateId,
        t: TermId,
        params: &[TermId],
    ) -> Result<TermId, EvalError> {
        self.state_at(store, q, t, params, &DeweyPath::root())
    }

    fn state_at(
        &mut self,
        store: &mut TermStore,
        q: StateId,
        t: TermId,
        params: &[TermId],
        path: &DeweyPath,
    ) -> Result<TermId, EvalError> {
        let key = (q, t, Box::<[TermId]>::from(params));
        if let Some(&r) = self.memo.get(&key) {
            return Ok(r);
        }
        let f = store.head(t);
        let mtt = self.mtt;
        let rhs = mtt.rule(q, f).ok_or_else(|| EvalError::NoRule {
            state: mtt.state_name(q).to_string(),
            symbol: store.sym_name(f).to_string(),
            path: path.clone(),
        })?;
        let r = self.rhs(store, rhs, t, params, path)?;
        self.memo.insert(key, r);
        Ok(r)
    }

    fn rhs(
        &mut self,
        store: &mut TermStore,
        rhs: &Rhs,
        t: TermId,
        params: &[TermId],
        path: &DeweyPath,
    ) -> Result<TermId, EvalError> {
        match rhs {
            Rhs::Out(s, kids) => {
                let mut vals = Vec::with_capacity(kids.len());
                for k in kids {
                    vals.push(self.rhs(store, k, t, params, path)?);
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
                let child = store.children(t)[c.child - 1];
                self.state_at(store, c.state, child, &args, &path.child(c.child))
            }
        }
    }

    pub fn axiom(
        &mut self,
        store: &mut TermStore,
        a: &Axiom,
        t: TermId,
    ) -> Result<TermId, EvalError> {
        let mut vals = Vec::with_capacity(a.calls.len());
        for c in &a.calls {
            vals.push(self.state(store, c.state, t, &c.args)?);
        }
        Ok(store.fill_tops(a.pattern, &vals))
    }
}

/// `⟦q⟧(t, params)`.
pub fn evaluate_state(
    store: &mut TermStore,
    m: &Mtt,
    q: StateId,
    t: TermId,
    params: &[TermId],
) -> Result<TermId, EvalError> {
    Evaluator::new(m).state(store, q, t, params)
}

/// `⟦(M, A)⟧(t)`.
pub fn evaluate_axiom(
    store: &mut TermStore,
    m: &Mtt,
    a: &Axiom,
    t: TermId,
) -> Result<TermId, EvalError> {
    Evaluator::new(m).axiom(store, a, t)
}

/// Removes unproductive states and records a minimal-height witness for each
/// remaining state. Among minimal-height witnesses the one with the least
/// preorder sequence of symbol names is chosen.
pub fn dta_analyze(store: &mut TermStore, d: &Dta) -> Result<Dta, ModelError> {
    let n = d.states.len();
    let mut height: Vec<Option<usize>> = vec![None; n];
    loop {
        let mut changed = false;
        for (&(b, f), kids) in &d.trans {
            let _ = f;
            let h = kids
                .iter()
                .map(|k| height[k.index()])
                .try_fold(0usize, |acc, h| h.map(|h| acc.max(h)));
            if let Some(h) = h {
                let cand = h + 1;
                if height[b.index()].is_none_or(|old| cand < old) {
                    height[b.index()] = Some(cand);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    if height[d.init.index()].is_none() {
        return Err(ModelError::EmptyDomain);
    }
    let mut renumber = vec![None; n];
    let mut states = Vec::new();
    for (i, name) in d.states.iter().enumerate() {
        if height[i].is_some() {
            renumber[i] = Some(DState(states.len() as u32));
            states.push(name.clone());
        }
    }
    let mut trans = BTreeMap::new();
    for (&(b, f), kids) in &d.trans {
        let Some(nb) = renumber[b.index()] else {
            continue;
        };
        let nk: Option<Vec<DState>> = kids.iter().map(|k| renumber[k.index()]).collect();
        if let Some(nk) = nk {
            trans.insert((nb, f), nk);
        }
    }
    let mut out = Dta {
        states,
        sigma: d.sigma.clone(),
        init: renumber[d.init.index()].expect("initial state is productive"),
        trans,
        witnesses: Vec::new(),
    };
    let min_height: Vec<usize> = (0..n).filter_map(|i| height[i]).collect();
    let mut memo = HashMap::new();
    let witnesses = out
        .state_ids()
        .map(|b| {
            least_tree(
                store,
                &out,
                &min_height,
                b,
                min_height[b.index()],
                &mut memo,
            )
        })
        .collect();
    out.witnesses = witnesses;
    Ok(out)
}

/// Least tree (by preorder names) of height at most `bound` accepted from `b`.
fn least_tree(
    store: &mut TermStore,
    d: &Dta,
    min_height: &[usize],
    b: DState,
    bound: usize,
    memo: &mut HashMap<(DState, usize), Option<TermId>>,
) -> Option<TermId> {
    if let Some(&r) = memo.get(&(b, bound)) {
        return r;
    }
    let mut best: Option<TermId> = None;
    if bound >= min_height[b.index()] {
        let trans: Vec<(SymId, Vec<DState>)> = d
            .transitions_from(b)
            .map(|(f, k)| (f, k.to_vec()))
            .collect();
        for (f, kids) in trans {
            if kids.iter().any(|k| min_height[k.index()] + 1 > bound) {
                continue;
            }
            let sub: Option<Vec<TermId>> = kids
                .iter()
                .map(|&k| least_tree(store, d, min_height, k, bound - 1, memo))
                .collect();
            let Some(sub) = sub else { continue };
            let t = store.app(f, &sub);
            best = match best {
                Some(old) if store.cmp_preorder(old, t).is_le() => Some(old),
                _ => Some(t),
            };
        }
    }
    memo.insert((b, bound), best);
    best
}

/// Specializes `m` to the automaton: states become pairs of a transducer
/// state and an automaton state, reachable from the axiom calls paired with
/// the initial automaton state.
pub fn product_annotate(
    store: &TermStore,
    m: &Mtt,
    a: &Axiom,
    d: &Dta,
    mode: Mode,
) -> Result<(Mtt, Axiom, StateMap), ModelError> {
    let single = d.states.len() == 1;
    let mut out = m.without_rules();
    out.states.clear();
    let mut pairs: HashMap<(StateId, DState), StateId> = HashMap::new();
    let mut pi = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern = |q: StateId,
                      b: DState,
                      out: &mut Mtt,
                      pi: &mut Vec<DState>,
                      queue: &mut VecDeque<(StateId, DState)>|
     -> StateId {
        *pairs.entry((q, b)).or_insert_with(|| {
            let name = if single {
                m.state_name(q).to_string()
            } else {
                format!("{}[{}]", m.state_name(q), d.states[b.index()])
            };
            out.states.push(name);
            pi.push(b);
            queue.push_back((q, b));
            StateId(out.states.len() as u32 - 1)
        })
    };
    let calls: Vec<AxiomCall> = a
        .calls
        .iter()
        .map(|c| AxiomCall {
            state: intern(c.state, d.init, &mut out, &mut pi, &mut queue),
            args: c.args.clone(),
        })
        .collect();
    let mut rules = Vec::new();
    while let Some((q, b)) = queue.pop_front() {
        let me = intern(q, b, &mut out, &mut pi, &mut queue);
        for (f, kids) in d.transitions_from(b) {
            let Some(rhs) = m.rule(q, f) else {
                if mode == Mode::Total {
                    return Err(ModelError::NotTotalRelative {
                        state: m.state_name(q).to_string(),
                        symbol: store.sym_name(f).to_string(),
                        dta_state: d.states[b.index()].clone(),
                    });
                }
                continue;
            };
            let new = rhs.map_calls(&mut |c: &Call| {
                let bi = kids[c.child - 1];
                Rhs::Call(Call {
                    state: intern(c.state, bi, &mut out, &mut pi, &mut queue),
                    child: c.child,
                    args: c.args.clone(),
                })
            });
            rules.push((me, f, new));
        }
    }
    for (q, f, rhs) in rules {
        out.add_rule(q, f, rhs);
    }
    Ok((
        out,
        Axiom {
            pattern: a.pattern,
            calls,
        },
        StateMap(pi),
    ))
}

/// Splits a right-hand side into its maximal top part over state-output
/// symbols and its leaves, left to right.
pub fn rhs_decompose(store: &mut TermStore, rhs: &Rhs) -> (Pattern, Vec<Leaf>) {
    let mut leaves = Vec::new();
    let p = rhs_prefix(store, rhs, &mut leaves);
    (Pattern::Tree(p), leaves)
}

fn rhs_prefix(store: &mut TermStore, rhs: &Rhs, leaves: &mut Vec<Leaf>) -> TermId {
    match rhs {
        Rhs::Out(s, kids) => {
            let k: Vec<TermId> = kids.iter().map(|k| rhs_prefix(store, k, leaves)).collect();
            store.app(*s, &k)
        }
        Rhs::Param(j) => {
            leaves.push(Leaf::Param(*j));
            store.top()
        }
        Rhs::Call(c) => {
            leaves.push(Leaf::Call(c.clone()));
            store.top()
        }
    }
}

/// Renders a right-hand side in the rule syntax.
pub fn render_rhs(store: &TermStore, m: &Mtt, rhs: &Rhs) -> String {
    let mut out = String::new();
    render_rhs_into(store, m, rhs, &mut out);
    out
}

fn render_rhs_into(store: &TermStore, m: &Mtt, rhs: &Rhs, out: &mut String) {
    match rhs {
        Rhs::Out(s, kids) => {
            crate::terms::push_name(store.sym_name(*s), out);
            if !kids.is_empty() {
                out.push('(');
                for (i, k) in kids.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    render_rhs_into(store, m, k, out);
                }
                out.push(')');
            }
        }
        Rhs::Param(j) => out.push_str(&format!("y{j}")),
        Rhs::Call(c) => {
            crate::terms::push_name(m.state_name(c.state), out);
            out.push_str(&format!("(x{}", c.child));
            for &a in &c.args {
                out.push_str(", ");
                out.push_str(&store.render(a));
            }
            out.push(')');
        }
    }
}

/// Renders a rule head and body, e.g. `q(f(x1,x2), y1) = …`.
pub fn render_rule(store: &TermStore, m: &Mtt, rule: &Rule) -> String {
    let mut out = String::new();
    crate::terms::push_name(m.state_name(rule.state), &mut out);
    out.push('(');
    crate::terms::push_name(store.sym_name(rule.symbol), &mut out);
    let rank = store.sym(rule.symbol).rank;
    if rank > 0 {
        let xs: Vec<String> = (1..=rank).map(|i| format!("x{i}")).collect();
        out.push_str(&format!("({})", xs.join(",")));
    }
    for j in 1..=m.params {
        out.push_str(&format!(", y{j}"));
    }
    out.push_str(") = ");
    out.push_str(&render_rhs(store, m, &rule.rhs));
    out
}

pub fn render_axiom(store: &TermStore, m: &Mtt, a: &Axiom) -> String {
    let mut fills = Vec::new();
    for c in &a.calls {
        let mut s = String::new();
        crate::terms::push_name(m.state_name(c.state), &mut s);
        s.push_str("(x1");
        for &t in &c.args {
            s.push_str(", ");
            s.push_str(&store.render(t));
        }
        s.push(')');
        fills.push(s);
    }
    let mut out = String::new();
    let mut next = 0;
    render_axiom_pattern(store, a.pattern, &fills, &mut next, &mut out);
    out
}

fn render_axiom_pattern(
    store: &TermStore,
    t: TermId,
    fills: &[String],
    next: &mut usize,
    out: &mut String,
) {
    if store.is_top(t) {
        out.push_str(&fills[*next]);
        *next += 1;
        return;
    }
    crate::terms::push_name(store.sym_name(store.head(t)), out);
    let kids = store.children(t);
    if !kids.is_empty() {
        out.push('(');
        for (i, &k) in kids.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            render_axiom_pattern(store, k, fills, next, out);
        }
        out.push(')');
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// q(a, y1, y2) -> y1 ; q(f(x1), y1, y2) -> g(q(x1, h(y2), b))
    fn small() -> (TermStore, Mtt, StateId, SymId, SymId) {
        let mut s = TermStore::new();
        let a = s.symbol("a", 0, SymbolClass::Input).unwrap();
        let f = s.symbol("f", 1, SymbolClass::Input).unwrap();
        let g = s.symbol("g", 1, SymbolClass::Output).unwrap();
        let h = s.symbol("h", 1, SymbolClass::Inner).unwrap();
        let b = s.symbol("b", 0, SymbolClass::Inner).unwrap();
        let mut m = Mtt::new(vec![a, f], vec![g], vec![h, b], 2);
        let q = m.add_state("q");
        m.add_rule(q, a, Rhs::Param(1));
        let y2 = s.var(Var::Y(2));
        let hy2 = s.app(h, &[y2]);
        let tb = s.leaf(b);
        m.add_rule(
            q,
            f,
            Rhs::Out(
                g,
                vec![Rhs::Call(Call {
                    state: q,
                    child: 1,
                    args: vec![hy2, tb],
                })],
            ),
        );
        (s, m, q, a, f)
    }

    #[test]
    fn well_formed_transducer_validates() {
        let (s, m, ..) = small();
        assert!(validate(&s, &m, Mode::Total).is_ok());
    }

    #[test]
    fn duplicate_rule_is_nondeterministic() {
        let (s, mut m, q, a, _) = small();
        m.add_rule(q, a, Rhs::Param(2));
        let r = validate(&s, &m, Mode::Total);
        assert_eq!(r.issues.len(), 1);
        assert_eq!(r.issues[0].kind, IssueKind::Nondeterministic);
    }

    #[test]
    fn inner_symbol_at_output_position_is_not_separated() {
        let (mut s, mut m, q, a, _) = small();
        let h = s.lookup(SymbolClass::Inner, "h").unwrap();
        m = {
            let mut m2 = m.without_rules();
            m2.add_rule(q, a, Rhs::Out(h, vec![Rhs::Param(1)]));
            for r in m.rules().iter().skip(1) {
                m2.add_rule(r.state, r.symbol, r.rhs.clone());
            }
            m2
        };
        let _ = &mut s;
        let r = validate(&s, &m, Mode::Total);
        assert!(r.issues.iter().any(|i| i.kind == IssueKind::NotSeparated));
    }

    #[test]
    fn missing_rule_only_in_total_mode() {
        let (mut s, m, q, _, f) = small();
        let mut m2 = m.without_rules();
        m2.add_rule(q, f, m.rule(q, f).unwrap().clone());
        let _ = &mut s;
        assert!(!validate(&s, &m2, Mode::Total).is_ok());
        assert!(validate(&s, &m2, Mode::Partial).is_ok());
    }

    #[test]
    fn out_of_range_parameter() {
        let (s, m, q, a, f) = small();
        let mut m2 = m.without_rules();
        m2.add_rule(q, a, Rhs::Param(3));
        m2.add_rule(q, f, m.rule(q, f).unwrap().clone());
        let r = validate(&s, &m2, Mode::Total);
        assert_eq!(r.issues[0].kind, IssueKind::ParamOutOfRange);
    }

    #[test]
    fn evaluation_projects_parameters() {
        let (mut s, m, q, a, f) = small();
        let ta = s.leaf(a);
        let s1 = s.symbol("s1", 0, SymbolClass::Inner).unwrap();
        let s2 = s.symbol("s2", 0, SymbolClass::Inner).unwrap();
        let (t1, t2) = (s.leaf(s1), s.leaf(s2));
        assert_eq!(evaluate_state(&mut s, &m, q, ta, &[t1, t2]).unwrap(), t1);
        let fa = s.app(f, &[ta]);
        let out = evaluate_state(&mut s, &m, q, fa, &[t1, t2]).unwrap();
        assert_eq!(s.render(out), "g(h(s2))");
    }

    #[test]
    fn missing_rule_reports_position() {
        let (mut s, m, q, a, f) = small();
        let mut m2 = m.without_rules();
        m2.add_rule(q, f, m.rule(q, f).unwrap().clone());
        let ta = s.leaf(a);
        let ffa = {
            let x = s.app(f, &[ta]);
            s.app(f, &[x])
        };
        let e = s.leaf(s.lookup(SymbolClass::Inner, "b").unwrap());
        let err = evaluate_state(&mut s, &m2, q, ffa, &[e, e]).unwrap_err();
        let EvalError::NoRule { path, .. } = err;
        assert_eq!(path.to_string(), "1.1");
        let _ = a;
    }

    #[test]
    fn decompose_rhs_with_call_leaf() {
        let (mut s, m, q, _, f) = small();
        let (p, leaves) = rhs_decompose(&mut s, m.rule(q, f).unwrap());
        assert_eq!(s.render_pattern(p), "g(⊤)");
        assert!(matches!(&leaves[..], [Leaf::Call(c)] if c.state == q && c.child == 1));
        let (p, leaves) = rhs_decompose(&mut s, &Rhs::Param(2));
        assert_eq!(p, s.top_pattern());
        assert_eq!(leaves, vec![Leaf::Param(2)]);
    }

    #[test]
    fn analysis_prunes_unproductive_states() {
        let mut s = TermStore::new();
        let a = s.symbol("a", 0, SymbolClass::Input).unwrap();
        let f = s.symbol("f", 1, SymbolClass::Input).unwrap();
        let mut trans = BTreeMap::new();
        trans.insert((DState(0), f), vec![DState(1)]);
        trans.insert((DState(0), a), vec![]);
        // state 1 only loops and never reaches a leaf
        trans.insert((DState(1), f), vec![DState(1)]);
        let d = Dta {
            states: vec!["b0".into(), "dead".into()],
            sigma: vec![a, f],
            init: DState(0),
            trans,
            witnesses: vec![],
        };
        let d2 = dta_analyze(&mut s, &d).unwrap();
        assert_eq!(d2.states, vec!["b0".to_string()]);
        assert_eq!(d2.trans.len(), 1);
        let w = d2.witness(d2.init).unwrap();
        assert_eq!(s.render(w), "a");
    }

    #[test]
    fn empty_initial_language_is_an_error() {
        let mut s = TermStore::new();
        let f = s.symbol("f", 1, SymbolClass::Input).unwrap();
        let mut trans = BTreeMap::new();
        trans.insert((DState(0), f), vec![DState(0)]);
        let d = Dta {
            states: vec!["b".into()],
            sigma: vec![f],
            init: DState(0),
            trans,
            witnesses: vec![],
        };
        assert_eq!(
            dta_analyze(&mut s, &d).unwrap_err(),
            ModelError::EmptyDomain
        );
    }
}
