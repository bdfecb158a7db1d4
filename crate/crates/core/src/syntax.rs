//! Text format for transducers, axioms, automata and look-ahead.
//!
//! ```text
//! sigma   { g/2 f/2 0/0 1/0 2/0 }
//! delta_o { +/2 */2 EXP/2 3/0 0/0 1/0 2/0 }
//! delta_i { s/1 p/1 z/0 }
//! params 1
//! state q q' r
//! rule q(f(x1,x2), y1) = +(r(x2,y1), q(x1,s(y1)))
//! rule S(i, y1) = *(i, EXP(3,y1)) where i in {0 1 2}, S in {q q' r}
//! axiom = q(x1, z)
//! dta { states b; init b; trans b(f) -> (b,b); trans b(0) -> (); }
//! ```
//!
//! Names are any run of characters other than whitespace and `(),={};#"<>|/\`;
//! anything else can be written in double quotes. `#` starts a comment.
//! `x1…` and `y1…` are the input and parameter variables.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::applications::{GuardedRule, LaState, LookaheadMtt};
use crate::model::{Axiom, AxiomCall, Call, DState, Dta, Mtt, Rhs, StateId};
use crate::terms::{is_reserved_word, push_name, SymId, SymbolClass, TermId, TermStore, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    Quoted(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Eq,
    Semi,
    Lt,
    Gt,
    Pipe,
    Slash,
    Arrow,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name(s) => write!(f, "`{s}`"),
            Tok::Quoted(s) => write!(f, "\"{s}\""),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Lt => f.write_str("`<`"),
            Tok::Gt => f.write_str("`>`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Arrow => f.write_str("`->`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SPECIAL: &str = "(),={};#\"<>|/\\";

fn lex(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, message: String| SyntaxError { line, col, message };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            *i += n;
            col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ',' => Some(Tok::Comma),
            '=' => Some(Tok::Eq),
            ';' => Some(Tok::Semi),
            '<' => Some(Tok::Lt),
            '>' => Some(Tok::Gt),
            '|' => Some(Tok::Pipe),
            '/' => Some(Tok::Slash),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token {
                tok,
                line: l0,
                col: c0,
            });
            advance(1, &mut i);
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'>') {
            out.push(Token {
                tok: Tok::Arrow,
                line: l0,
                col: c0,
            });
            advance(2, &mut i);
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            advance(1, &mut i);
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(err(l0, c0, "unterminated quoted name".into()))
                    }
                    Some('"') => {
                        advance(1, &mut i);
                        break;
                    }
                    Some('\\') => {
                        let Some(&e) = chars.get(i + 1) else {
                            return Err(err(l0, c0, "unterminated quoted name".into()));
                        };
                        s.push(e);
                        advance(2, &mut i);
                    }
                    Some(&ch) => {
                        s.push(ch);
                        advance(1, &mut i);
                    }
                }
            }
            if s.is_empty() {
                return Err(err(l0, c0, "empty quoted name".into()));
            }
            out.push(Token {
                tok: Tok::Quoted(s),
                line: l0,
                col: c0,
            });
            continue;
        }
        if c == '\\' {
            return Err(err(l0, c0, "unexpected `\\`".into()));
        }
        let mut s = String::new();
        while let Some(&ch) = chars.get(i) {
            if ch.is_whitespace() || SPECIAL.contains(ch) {
                break;
            }
            if ch == '-' && chars.get(i + 1) == Some(&'>') {
                break;
            }
            s.push(ch);
            advance(1, &mut i);
        }
        out.push(Token {
            tok: Tok::Name(s),
            line: l0,
            col: c0,
        });
    }
    Ok(out)
}

const STATEMENTS: &[&str] = &[
    "sigma",
    "delta_o",
    "delta_i",
    "params",
    "state",
    "rule",
    "axiom",
    "dta",
    "lookahead",
];

/// Contents of one file. Each part is present only if the file declares it.
#[derive(Debug, Clone, Default)]
pub struct SpecFile {
    pub sigma: Vec<SymId>,
    pub delta_o: Vec<SymId>,
    pub delta_i: Vec<SymId>,
    pub mtt: Option<Mtt>,
    pub axiom: Option<Axiom>,
    pub dta: Option<Dta>,
    pub lookahead: Option<LookaheadMtt>,
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    end: (usize, usize),
}

impl<'a> Cursor<'a> {
    fn new(toks: &'a [Token], end: (usize, usize)) -> Self {
        Cursor { toks, pos: 0, end }
    }

    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map_or(self.end, |t| (t.line, t.col))
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        let (line, col) = self.here();
        Err(SyntaxError {
            line,
            col,
            message: message.into(),
        })
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek().is_some_and(|t| &t.tok == tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok) -> Result<(), SyntaxError> {
        if self.eat(tok) {
            Ok(())
        } else {
            match self.peek() {
                Some(t) => self.error(format!("expected {tok}, found {}", t.tok)),
                None => self.error(format!("expected {tok}, found end of input")),
            }
        }
    }

    /// A name token; `quoted` tells whether it was written in quotes.
    fn name(&mut self) -> Result<(String, bool, (usize, usize)), SyntaxError> {
        let at = self.here();
        match self.peek().map(|t| &t.tok) {
            Some(Tok::Name(s)) => {
                self.pos += 1;
                Ok((s.clone(), false, at))
            }
            Some(Tok::Quoted(s)) => {
                self.pos += 1;
                Ok((s.clone(), true, at))
            }
            Some(t) => self.error(format!("expected a name, found {t}")),
            None => self.error("expected a name, found end of input"),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        let (n, q, _) = self.name()?;
        if q || n != kw {
            self.pos -= 1;
            return self.error(format!("expected `{kw}`"));
        }
        Ok(())
    }

    fn number(&mut self) -> Result<usize, SyntaxError> {
        let (n, q, (line, col)) = self.name()?;
        if q {
            return Err(SyntaxError {
                line,
                col,
                message: "expected a number".into(),
            });
        }
        n.parse().map_err(|_| SyntaxError {
            line,
            col,
            message: format!("expected a number, found `{n}`"),
        })
    }
}

fn var_index(name: &str, quoted: bool, prefix: char) -> Option<usize> {
    if quoted || !name.starts_with(prefix) || name.len() < 2 {
        return None;
    }
    let digits = &name[1..];
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

struct RawRule<'a> {
    toks: Vec<Token>,
    at: &'a Token,
}

/// Parses a whole file into `store`.
pub fn parse_spec(store: &mut TermStore, text: &str) -> Result<SpecFile, SyntaxError> {
    let toks = lex(text)?;
    let end = toks.last().map_or((1, 1), |t| (t.line, t.col + 1));
    let mut cur = Cursor::new(&toks, end);
    let mut spec = SpecFile::default();
    let mut params: Option<usize> = None;
    let mut states: Vec<String> = Vec::new();
    let mut rules: Vec<RawRule> = Vec::new();
    let mut axiom_toks: Option<(Vec<Token>, &Token)> = None;
    let mut dta_toks: Option<(Vec<Token>, &Token)> = None;
    let mut la_toks: Option<(Vec<Token>, &Token)> = None;
    while let Some(t) = cur.peek() {
        let kw = match &t.tok {
            Tok::Name(s) if STATEMENTS.contains(&s.as_str()) => s.clone(),
            Tok::Semi => {
                cur.next();
                continue;
            }
            other => return cur.error(format!("expected a statement keyword, found {other}")),
        };
        cur.next();
        match kw.as_str() {
            "sigma" | "delta_o" | "delta_i" => {
                let class = match kw.as_str() {
                    "sigma" => SymbolClass::Input,
                    "delta_o" => SymbolClass::Output,
                    _ => SymbolClass::Inner,
                };
                cur.expect(&Tok::LBrace)?;
                while !cur.eat(&Tok::RBrace) {
                    let (name, _, (line, col)) = cur.name()?;
                    cur.expect(&Tok::Slash)?;
                    let rank = cur.number()?;
                    let id = store.symbol(&name, rank, class).map_err(|e| SyntaxError {
                        line,
                        col,
                        message: e.to_string(),
                    })?;
                    let list = match class {
                        SymbolClass::Input => &mut spec.sigma,
                        SymbolClass::Output => &mut spec.delta_o,
                        _ => &mut spec.delta_i,
                    };
                    if !list.contains(&id) {
                        list.push(id);
                    }
                    cur.eat(&Tok::Comma);
                }
            }
            "params" => {
                if params.is_some() {
                    return cur.error("`params` given twice");
                }
                params = Some(cur.number()?);
            }
            "state" => {
                let mut any = false;
                while let Some(t) = cur.peek() {
                    match &t.tok {
                        Tok::Name(s) if STATEMENTS.contains(&s.as_str()) => break,
                        Tok::Name(_) | Tok::Quoted(_) => {
                            let (n, _, _) = cur.name()?;
                            if states.contains(&n) {
                                return Err(SyntaxError {
                                    line: t.line,
                                    col: t.col,
                                    message: format!("state `{n}` declared twice"),
                                });
                            }
                            states.push(n);
                            any = true;
                        }
                        Tok::Comma => {
                            cur.next();
                        }
                        _ => break,
                    }
                }
                if !any {
                    return cur.error("expected state names");
                }
            }
            "rule" | "axiom" => {
                let at = &toks[cur.pos - 1];
                let start = cur.pos;
                let mut depth = 0i32;
                while let Some(t) = cur.peek() {
                    match &t.tok {
                        Tok::LParen | Tok::LBrace => depth += 1,
                        Tok::RParen | Tok::RBrace => depth -= 1,
                        Tok::Semi if depth == 0 => break,
                        Tok::Name(s) if depth == 0 && STATEMENTS.contains(&s.as_str()) => break,
                        _ => {}
                    }
                    cur.next();
                }
                let body = toks[start..cur.pos].to_vec();
                if kw == "rule" {
                    rules.push(RawRule { toks: body, at });
                } else if axiom_toks.is_some() {
                    return Err(SyntaxError {
                        line: at.line,
                        col: at.col,
                        message: "axiom given twice".into(),
                    });
                } else {
                    axiom_toks = Some((body, at));
                }
            }
            "dta" | "lookahead" => {
                let at = &toks[cur.pos - 1];
                let start = cur.pos;
                cur.expect(&Tok::LBrace)?;
                let mut depth = 1;
                while depth > 0 {
                    match cur.next().map(|t| &t.tok) {
                        None => return cur.error("unclosed `{`"),
                        Some(Tok::LBrace) => depth += 1,
                        Some(Tok::RBrace) => depth -= 1,
                        _ => {}
                    }
                }
                let body = toks[start..cur.pos].to_vec();
                let slot = if kw == "dta" {
                    &mut dta_toks
                } else {
                    &mut la_toks
                };
                if slot.is_some() {
                    return Err(SyntaxError {
                        line: at.line,
                        col: at.col,
                        message: format!("`{kw}` block given twice"),
                    });
                }
                *slot = Some((body, at));
            }
            _ => unreachable!(),
        }
    }

    if let Some((body, at)) = dta_toks {
        spec.dta = Some(parse_dta(store, &spec, &body, at)?);
    }
    let has_mtt = !states.is_empty() || !rules.is_empty() || axiom_toks.is_some();
    if !has_mtt {
        if let Some((_, at)) = la_toks {
            return Err(SyntaxError {
                line: at.line,
                col: at.col,
                message: "`lookahead` block without a transducer".into(),
            });
        }
        return Ok(spec);
    }
    let Some(l) = params else {
        let at = rules
            .first()
            .map(|r| r.at)
            .or(axiom_toks.as_ref().map(|a| a.1));
        let (line, col) = at.map_or((1, 1), |t| (t.line, t.col));
        return Err(SyntaxError {
            line,
            col,
            message: "missing `params` declaration".into(),
        });
    };
    let mut mtt = Mtt::new(
        spec.sigma.clone(),
        spec.delta_o.clone(),
        spec.delta_i.clone(),
        l,
    );
    for s in &states {
        mtt.add_state(s);
    }
    let la = match la_toks {
        Some((body, at)) => Some(parse_lookahead_block(store, &spec, &body, at)?),
        None => None,
    };
    let mut guarded = Vec::new();
    for raw in &rules {
        for inst in expand_template(&raw.toks, raw.at)? {
            let end = inst
                .last()
                .map_or((raw.at.line, raw.at.col), |t| (t.line, t.col + 1));
            let mut c = Cursor::new(&inst, end);
            let (q, f, guard, rhs) = parse_rule(store, &mtt, la.as_ref(), &mut c)?;
            match (&la, guard) {
                (Some(_), Some(g)) => guarded.push(GuardedRule {
                    state: q,
                    symbol: f,
                    guard: g,
                    rhs,
                }),
                (None, None) => mtt.add_rule(q, f, rhs),
                (None, Some(_)) => {
                    return Err(SyntaxError {
                        line: raw.at.line,
                        col: raw.at.col,
                        message: "look-ahead guard without a `lookahead` block".into(),
                    })
                }
                (Some(_), None) => {
                    let k = store.sym(f).rank;
                    if k > 0 {
                        return Err(SyntaxError {
                            line: raw.at.line,
                            col: raw.at.col,
                            message: "rule needs a look-ahead guard".into(),
                        });
                    }
                    guarded.push(GuardedRule {
                        state: q,
                        symbol: f,
                        guard: Vec::new(),
                        rhs,
                    });
                }
            }
        }
    }
    if let Some((body, at)) = axiom_toks {
        let end = body
            .last()
            .map_or((at.line, at.col), |t| (t.line, t.col + 1));
        let mut c = Cursor::new(&body, end);
        spec.axiom = Some(parse_axiom(store, &mtt, &mut c)?);
    }
    if let Some((la_states, la_trans)) = la {
        spec.lookahead = Some(LookaheadMtt {
            base: mtt,
            la_states,
            la_trans,
            rules: guarded,
        });
    } else {
        spec.mtt = Some(mtt);
    }
    Ok(spec)
}

/// Expands `… where v in {a b}, w in {c d}` into one token list per choice.
fn expand_template(toks: &[Token], at: &Token) -> Result<Vec<Vec<Token>>, SyntaxError> {
    let split = toks
        .iter()
        .position(|t| matches!(&t.tok, Tok::Name(s) if s == "where"));
    let Some(split) = split else {
        return Ok(vec![toks.to_vec()]);
    };
    let (body, tail) = (&toks[..split], &toks[split + 1..]);
    let end = tail
        .last()
        .map_or((at.line, at.col), |t| (t.line, t.col + 1));
    let mut c = Cursor::new(tail, end);
    let mut vars: Vec<(String, Vec<Token>)> = Vec::new();
    loop {
        let (v, q, (line, col)) = c.name()?;
        if q {
            return Err(SyntaxError {
                line,
                col,
                message: "template variable cannot be quoted".into(),
            });
        }
        c.keyword("in")?;
        c.expect(&Tok::LBrace)?;
        let mut vals = Vec::new();
        while !c.eat(&Tok::RBrace) {
            let t = c.next().ok_or(SyntaxError {
                line,
                col,
                message: "unclosed `{`".into(),
            })?;
            match &t.tok {
                Tok::Name(_) | Tok::Quoted(_) => vals.push(t.clone()),
                Tok::Comma => {}
                other => {
                    return Err(SyntaxError {
                        line: t.line,
                        col: t.col,
                        message: format!("expected a name, found {other}"),
                    })
                }
            }
        }
        if vals.is_empty() {
            return Err(SyntaxError {
                line,
                col,
                message: format!("template variable `{v}` has no values"),
            });
        }
        vars.push((v, vals));
        if !c.eat(&Tok::Comma) {
            break;
        }
    }
    if !c.at_end() {
        return c.error("unexpected input after template");
    }
    let mut out = vec![body.to_vec()];
    for (v, vals) in &vars {
        let mut next = Vec::new();
        for inst in &out {
            for val in vals {
                next.push(
                    inst.iter()
                        .map(|t| match &t.tok {
                            Tok::Name(s) if s == v => Token {
                                tok: val.tok.clone(),
                                line: t.line,
                                col: t.col,
                            },
                            _ => t.clone(),
                        })
                        .collect(),
                );
            }
        }
        out = next;
    }
    Ok(out)
}

fn lookup_in(store: &TermStore, list: &[SymId], class: SymbolClass, name: &str) -> Option<SymId> {
    store.lookup(class, name).filter(|s| list.contains(s))
}

type LaBlock = (Vec<String>, BTreeMap<(SymId, Vec<LaState>), LaState>);

fn parse_rule(
    store: &mut TermStore,
    m: &Mtt,
    la: Option<&LaBlock>,
    c: &mut Cursor,
) -> Result<(StateId, SymId, Option<Vec<LaState>>, Rhs), SyntaxError> {
    let (qname, _, (ql, qc)) = c.name()?;
    let q = m.state_named(&qname).ok_or(SyntaxError {
        line: ql,
        col: qc,
        message: format!("unknown state `{qname}`"),
    })?;
    c.expect(&Tok::LParen)?;
    let (fname, _, (fl, fc)) = c.name()?;
    let f = lookup_in(store, &m.sigma, SymbolClass::Input, &fname).ok_or(SyntaxError {
        line: fl,
        col: fc,
        message: format!("unknown input symbol `{fname}`"),
    })?;
    let k = store.sym(f).rank;
    let mut xs = 0;
    if c.eat(&Tok::LParen) {
        loop {
            let (x, quoted, (line, col)) = c.name()?;
            xs += 1;
            if var_index(&x, quoted, 'x') != Some(xs) {
                return Err(SyntaxError {
                    line,
                    col,
                    message: format!("expected input variable x{xs}, found `{x}`"),
                });
            }
            if !c.eat(&Tok::Comma) {
                break;
            }
        }
        c.expect(&Tok::RParen)?;
    }
    if xs != k {
        return Err(SyntaxError {
            line: fl,
            col: fc,
            message: format!("`{fname}` has rank {k} but the rule binds {xs} input variables"),
        });
    }
    let mut ys = 0;
    while c.eat(&Tok::Comma) {
        let (y, quoted, (line, col)) = c.name()?;
        if var_index(&y, quoted, 'y').is_none() {
            return Err(SyntaxError {
                line,
                col,
                message: format!("expected a parameter variable, found `{y}`"),
            });
        }
        ys += 1;
    }
    if ys != m.params {
        return Err(SyntaxError {
            line: ql,
            col: qc,
            message: format!("rule head lists {ys} parameters, expected {}", m.params),
        });
    }
    c.expect(&Tok::RParen)?;
    let guard = if c.eat(&Tok::Lt) {
        let Some((la_states, _)) = la else {
            return c.error("look-ahead guard without a `lookahead` block");
        };
        let mut g = Vec::new();
        while !c.eat(&Tok::Gt) {
            let (r, _, (line, col)) = c.name()?;
            let idx = la_states.iter().position(|s| *s == r).ok_or(SyntaxError {
                line,
                col,
                message: format!("unknown look-ahead state `{r}`"),
            })?;
            g.push(LaState(idx as u32));
            if !c.eat(&Tok::Comma) {
                c.expect(&Tok::Gt)?;
                break;
            }
        }
        if g.len() != k {
            return Err(SyntaxError {
                line: fl,
                col: fc,
                message: format!("guard has {} states, expected {k}", g.len()),
            });
        }
        Some(g)
    } else {
        None
    };
    c.expect(&Tok::Eq)?;
    if c.at_end() {
        return c.error("empty rule body");
    }
    let rhs = parse_rhs(store, m, c)?;
    if !c.at_end() {
        return c.error("unexpected input after rule body");
    }
    Ok((q, f, guard, rhs))
}

fn is_call(m: &Mtt, c: &Cursor, name: &str) -> bool {
    m.state_named(name).is_some()
        && matches!(c.toks.get(c.pos).map(|t| &t.tok), Some(Tok::LParen))
        && matches!(
            c.toks.get(c.pos + 1).map(|t| &t.tok),
            Some(Tok::Name(x)) if var_index(x, false, 'x').is_some()
        )
}

fn parse_rhs(store: &mut TermStore, m: &Mtt, c: &mut Cursor) -> Result<Rhs, SyntaxError> {
    let (name, quoted, (line, col)) = c.name()?;
    let err = |message: String| SyntaxError { line, col, message };
    if let Some(j) = var_index(&name, quoted, 'y') {
        return Ok(Rhs::Param(j));
    }
    if var_index(&name, quoted, 'x').is_some() {
        return Err(err(format!("input variable `{name}` outside a state call")));
    }
    if !quoted && is_call(m, c, &name) {
        let state = m.state_named(&name).expect("checked");
        c.expect(&Tok::LParen)?;
        let (x, _, _) = c.name()?;
        let child = var_index(&x, false, 'x').expect("checked");
        let mut args = Vec::new();
        while c.eat(&Tok::Comma) {
            args.push(parse_param_term(store, m, c)?);
        }
        c.expect(&Tok::RParen)?;
        return Ok(Rhs::Call(Call { state, child, args }));
    }
    let sym = lookup_in(store, &m.delta_o, SymbolClass::Output, &name)
        .or_else(|| lookup_in(store, &m.delta_i, SymbolClass::Inner, &name))
        .ok_or_else(|| err(format!("unknown output symbol `{name}`")))?;
    let kids = parse_args(c, |c| parse_rhs(store, m, c))?;
    check_rank(store, sym, kids.len(), line, col)?;
    Ok(Rhs::Out(sym, kids))
}

fn parse_args<T>(
    c: &mut Cursor,
    mut item: impl FnMut(&mut Cursor) -> Result<T, SyntaxError>,
) -> Result<Vec<T>, SyntaxError> {
    let mut kids = Vec::new();
    if c.eat(&Tok::LParen) {
        loop {
            kids.push(item(c)?);
            if !c.eat(&Tok::Comma) {
                break;
            }
        }
        c.expect(&Tok::RParen)?;
    }
    Ok(kids)
}

fn check_rank(
    store: &TermStore,
    sym: SymId,
    found: usize,
    line: usize,
    col: usize,
) -> Result<(), SyntaxError> {
    let s = store.sym(sym);
    if s.rank != found {
        return Err(SyntaxError {
            line,
            col,
            message: format!(
                "`{}` has rank {} but is applied to {found} arguments",
                s.name, s.rank
            ),
        });
    }
    Ok(())
}

/// A parameter argument: parameter-output symbols and `y` variables.
fn parse_param_term(store: &mut TermStore, m: &Mtt, c: &mut Cursor) -> Result<TermId, SyntaxError> {
    let (name, quoted, (line, col)) = c.name()?;
    let err = |message: String| SyntaxError { line, col, message };
    if let Some(j) = var_index(&name, quoted, 'y') {
        return Ok(store.var(Var::Y(j as u32)));
    }
    if !quoted && is_call(m, c, &name) {
        return Err(err(format!(
            "state call `{name}` inside a parameter argument (transducer must be basic)"
        )));
    }
    let sym = lookup_in(store, &m.delta_i, SymbolClass::Inner, &name)
        .or_else(|| lookup_in(store, &m.delta_o, SymbolClass::Output, &name))
        .ok_or_else(|| err(format!("unknown parameter symbol `{name}`")))?;
    let kids = parse_args(c, |c| parse_param_term(store, m, c))?;
    check_rank(store, sym, kids.len(), line, col)?;
    Ok(store.app(sym, &kids))
}

fn parse_axiom(store: &mut TermStore, m: &Mtt, c: &mut Cursor) -> Result<Axiom, SyntaxError> {
    c.expect(&Tok::Eq)?;
    if c.at_end() {
        return c.error("empty axiom");
    }
    let mut calls = Vec::new();
    let pattern = parse_axiom_term(store, m, c, &mut calls)?;
    if !c.at_end() {
        return c.error("unexpected input after axiom");
    }
    Ok(Axiom { pattern, calls })
}

fn parse_axiom_term(
    store: &mut TermStore,
    m: &Mtt,
    c: &mut Cursor,
    calls: &mut Vec<AxiomCall>,
) -> Result<TermId, SyntaxError> {
    let (name, quoted, (line, col)) = c.name()?;
    let err = |message: String| SyntaxError { line, col, message };
    if !quoted && is_call(m, c, &name) {
        let state = m.state_named(&name).expect("checked");
        c.expect(&Tok::LParen)?;
        let (x, _, (xl, xc)) = c.name()?;
        if x != "x1" {
            return Err(SyntaxError {
                line: xl,
                col: xc,
                message: "axiom calls must be applied to x1".into(),
            });
        }
        let mut args = Vec::new();
        while c.eat(&Tok::Comma) {
            args.push(parse_param_term(store, m, c)?);
        }
        c.expect(&Tok::RParen)?;
        calls.push(AxiomCall { state, args });
        return Ok(store.top());
    }
    if var_index(&name, quoted, 'y').is_some() || var_index(&name, quoted, 'x').is_some() {
        return Err(err(format!("variable `{name}` in the axiom pattern")));
    }
    let sym = lookup_in(store, &m.delta_o, SymbolClass::Output, &name)
        .ok_or_else(|| err(format!("unknown output symbol `{name}`")))?;
    let kids = parse_args(c, |c| parse_axiom_term(store, m, c, calls))?;
    check_rank(store, sym, kids.len(), line, col)?;
    Ok(store.app(sym, &kids))
}

fn input_symbol(store: &TermStore, spec: &SpecFile, name: &str) -> Option<SymId> {
    let s = store.lookup(SymbolClass::Input, name)?;
    (spec.sigma.is_empty() || spec.sigma.contains(&s)).then_some(s)
}

fn parse_dta(
    store: &mut TermStore,
    spec: &SpecFile,
    body: &[Token],
    at: &Token,
) -> Result<Dta, SyntaxError> {
    let end = body
        .last()
        .map_or((at.line, at.col), |t| (t.line, t.col + 1));
    let mut c = Cursor::new(body, end);
    c.expect(&Tok::LBrace)?;
    let mut states: Vec<String> = Vec::new();
    let mut init = None;
    let mut trans = BTreeMap::new();
    let mut used = Vec::new();
    let state_of = |states: &[String], name: &str, line, col| {
        states
            .iter()
            .position(|s| s == name)
            .map(|i| DState(i as u32))
            .ok_or(SyntaxError {
                line,
                col,
                message: format!("unknown automaton state `{name}`"),
            })
    };
    while !c.eat(&Tok::RBrace) {
        if c.eat(&Tok::Semi) {
            continue;
        }
        let (kw, _, (line, col)) = c.name()?;
        match kw.as_str() {
            "states" => {
                while let Some(Tok::Name(_) | Tok::Quoted(_)) = c.peek().map(|t| &t.tok) {
                    let (n, _, (l, cc)) = c.name()?;
                    if states.contains(&n) {
                        return Err(SyntaxError {
                            line: l,
                            col: cc,
                            message: format!("automaton state `{n}` declared twice"),
                        });
                    }
                    states.push(n);
                    c.eat(&Tok::Comma);
                }
            }
            "init" => {
                let (n, _, (l, cc)) = c.name()?;
                init = Some(state_of(&states, &n, l, cc)?);
            }
            "trans" => {
                let (b, _, (l, cc)) = c.name()?;
                let from = state_of(&states, &b, l, cc)?;
                c.expect(&Tok::LParen)?;
                let (f, _, (fl, fc)) = c.name()?;
                let sym = input_symbol(store, spec, &f).ok_or(SyntaxError {
                    line: fl,
                    col: fc,
                    message: format!("unknown input symbol `{f}`"),
                })?;
                c.expect(&Tok::RParen)?;
                c.expect(&Tok::Arrow)?;
                c.expect(&Tok::LParen)?;
                let mut kids = Vec::new();
                while !c.eat(&Tok::RParen) {
                    let (n, _, (l, cc)) = c.name()?;
                    kids.push(state_of(&states, &n, l, cc)?);
                    if !c.eat(&Tok::Comma) {
                        c.expect(&Tok::RParen)?;
                        break;
                    }
                }
                check_rank(store, sym, kids.len(), fl, fc)?;
                if trans.insert((from, sym), kids).is_some() {
                    return Err(SyntaxError {
                        line,
                        col,
                        message: format!("second transition for `{b}` on `{f}`"),
                    });
                }
                if !used.contains(&sym) {
                    used.push(sym);
                }
            }
            other => {
                return Err(SyntaxError {
                    line,
                    col,
                    message: format!("expected `states`, `init` or `trans`, found `{other}`"),
                })
            }
        }
    }
    if states.is_empty() {
        return Err(SyntaxError {
            line: at.line,
            col: at.col,
            message: "automaton without states".into(),
        });
    }
    let sigma = if spec.sigma.is_empty() {
        used
    } else {
        spec.sigma.clone()
    };
    Ok(Dta {
        states,
        sigma,
        init: init.unwrap_or(DState(0)),
        trans,
        witnesses: Vec::new(),
    })
}

fn parse_lookahead_block(
    store: &mut TermStore,
    spec: &SpecFile,
    body: &[Token],
    at: &Token,
) -> Result<LaBlock, SyntaxError> {
    let end = body
        .last()
        .map_or((at.line, at.col), |t| (t.line, t.col + 1));
    let mut c = Cursor::new(body, end);
    c.expect(&Tok::LBrace)?;
    let mut states: Vec<String> = Vec::new();
    let mut trans = BTreeMap::new();
    let state_of = |states: &[String], name: &str, line, col| {
        states
            .iter()
            .position(|s| s == name)
            .map(|i| LaState(i as u32))
            .ok_or(SyntaxError {
                line,
                col,
                message: format!("unknown look-ahead state `{name}`"),
            })
    };
    while !c.eat(&Tok::RBrace) {
        if c.eat(&Tok::Semi) {
            continue;
        }
        let (kw, _, (line, col)) = c.name()?;
        match kw.as_str() {
            "states" => {
                while let Some(Tok::Name(_) | Tok::Quoted(_)) = c.peek().map(|t| &t.tok) {
                    let (n, _, _) = c.name()?;
                    states.push(n);
                    c.eat(&Tok::Comma);
                }
            }
            "trans" => {
                let (f, _, (fl, fc)) = c.name()?;
                let sym = input_symbol(store, spec, &f).ok_or(SyntaxError {
                    line: fl,
                    col: fc,
                    message: format!("unknown input symbol `{f}`"),
                })?;
                let mut kids = Vec::new();
                if c.eat(&Tok::LParen) {
                    while !c.eat(&Tok::RParen) {
                        let (n, _, (l, cc)) = c.name()?;
                        kids.push(state_of(&states, &n, l, cc)?);
                        if !c.eat(&Tok::Comma) {
                            c.expect(&Tok::RParen)?;
                            break;
                        }
                    }
                }
                check_rank(store, sym, kids.len(), fl, fc)?;
                c.expect(&Tok::Arrow)?;
                let (n, _, (l, cc)) = c.name()?;
                let to = state_of(&states, &n, l, cc)?;
                if trans.insert((sym, kids), to).is_some() {
                    return Err(SyntaxError {
                        line,
                        col,
                        message: format!("second look-ahead transition for `{f}`"),
                    });
                }
            }
            other => {
                return Err(SyntaxError {
                    line,
                    col,
                    message: format!("expected `states` or `trans`, found `{other}`"),
                })
            }
        }
    }
    Ok((states, trans))
}

/// Parses a ground tree over the given alphabet class, e.g. an input tree.
pub fn parse_tree(
    store: &mut TermStore,
    alphabet: &[SymId],
    class: SymbolClass,
    text: &str,
) -> Result<TermId, SyntaxError> {
    let toks = lex(text)?;
    let end = toks.last().map_or((1, 1), |t| (t.line, t.col + 1));
    let mut c = Cursor::new(&toks, end);
    if c.at_end() {
        return c.error("empty tree");
    }
    let t = parse_ground(store, alphabet, class, &mut c)?;
    if !c.at_end() {
        return c.error("unexpected input after tree");
    }
    Ok(t)
}

fn parse_ground(
    store: &mut TermStore,
    alphabet: &[SymId],
    class: SymbolClass,
    c: &mut Cursor,
) -> Result<TermId, SyntaxError> {
    let (name, _, (line, col)) = c.name()?;
    let sym = lookup_in(store, alphabet, class, &name).ok_or(SyntaxError {
        line,
        col,
        message: format!("unknown symbol `{name}`"),
    })?;
    let kids = parse_args(c, |c| parse_ground(store, alphabet, class, c))?;
    check_rank(store, sym, kids.len(), line, col)?;
    Ok(store.app(sym, &kids))
}

/// Parses a comma-separated list of ground trees.
pub fn parse_tree_list(
    store: &mut TermStore,
    alphabet: &[SymId],
    class: SymbolClass,
    text: &str,
) -> Result<Vec<TermId>, SyntaxError> {
    let toks = lex(text)?;
    let end = toks.last().map_or((1, 1), |t| (t.line, t.col + 1));
    let mut c = Cursor::new(&toks, end);
    let mut out = Vec::new();
    while !c.at_end() {
        out.push(parse_ground(store, alphabet, class, &mut c)?);
        if !c.eat(&Tok::Comma) {
            break;
        }
    }
    if !c.at_end() {
        return c.error("unexpected input after tree list");
    }
    Ok(out)
}

fn name(s: &str) -> String {
    let mut out = String::new();
    push_name(s, &mut out);
    out
}

fn render_alphabet(store: &TermStore, kw: &str, syms: &[SymId], out: &mut String) {
    let items: Vec<String> = syms
        .iter()
        .map(|&s| format!("{}/{}", name(store.sym_name(s)), store.sym(s).rank))
        .collect();
    out.push_str(&format!("{kw} {{ {} }}\n", items.join(" ")));
}

fn render_head(store: &TermStore, m: &Mtt, q: StateId, f: SymId) -> String {
    let mut out = name(m.state_name(q));
    out.push('(');
    out.push_str(&name(store.sym_name(f)));
    let rank = store.sym(f).rank;
    if rank > 0 {
        let xs: Vec<String> = (1..=rank).map(|i| format!("x{i}")).collect();
        out.push_str(&format!("({})", xs.join(",")));
    }
    for j in 1..=m.params {
        out.push_str(&format!(", y{j}"));
    }
    out.push(')');
    out
}

/// Renders a transducer (and its axiom) in the input format.
pub fn render_mtt(store: &TermStore, m: &Mtt, a: Option<&Axiom>) -> String {
    let mut out = String::new();
    render_alphabet(store, "sigma", &m.sigma, &mut out);
    render_alphabet(store, "delta_o", &m.delta_o, &mut out);
    render_alphabet(store, "delta_i", &m.delta_i, &mut out);
    out.push_str(&format!("params {}\n", m.params));
    if !m.states.is_empty() {
        let names: Vec<String> = m.states.iter().map(|s| name(s)).collect();
        out.push_str(&format!("state {}\n", names.join(" ")));
    }
    for r in m.rules() {
        out.push_str(&format!(
            "rule {} = {}\n",
            render_head(store, m, r.state, r.symbol),
            crate::model::render_rhs(store, m, &r.rhs)
        ));
    }
    if let Some(a) = a {
        out.push_str(&format!(
            "axiom = {}\n",
            crate::model::render_axiom(store, m, a)
        ));
    }
    out
}

/// Renders an automaton block, preceded by its input alphabet.
pub fn render_dta(store: &TermStore, d: &Dta) -> String {
    let mut out = String::new();
    render_alphabet(store, "sigma", &d.sigma, &mut out);
    out.push_str(&render_dta_block(store, d));
    out
}

pub fn render_dta_block(store: &TermStore, d: &Dta) -> String {
    let mut out = String::from("dta {\n");
    let names: Vec<String> = d.states.iter().map(|s| name(s)).collect();
    out.push_str(&format!("  states {};\n", names.join(" ")));
    out.push_str(&format!("  init {};\n", names[d.init.index()]));
    for ((b, f), kids) in &d.trans {
        let ks: Vec<&str> = kids.iter().map(|k| names[k.index()].as_str()).collect();
        out.push_str(&format!(
            "  trans {}({}) -> ({});\n",
            names[b.index()],
            name(store.sym_name(*f)),
            ks.join(", ")
        ));
    }
    out.push_str("}\n");
    out
}

pub fn render_lookahead(store: &TermStore, n: &LookaheadMtt, a: Option<&Axiom>) -> String {
    let mut out = render_mtt(store, &n.base, None);
    let names: Vec<String> = n.la_states.iter().map(|s| name(s)).collect();
    out.push_str(&format!("lookahead {{\n  states {};\n", names.join(" ")));
    for ((f, kids), to) in &n.la_trans {
        let ks: Vec<&str> = kids.iter().map(|k| names[k.index()].as_str()).collect();
        let args = if kids.is_empty() {
            String::new()
        } else {
            format!("({})", ks.join(", "))
        };
        out.push_str(&format!(
            "  trans {}{} -> {};\n",
            name(store.sym_name(*f)),
            args,
            names[to.index()]
        ));
    }
    out.push_str("}\n");
    for r in &n.rules {
        let g: Vec<&str> = r.guard.iter().map(|k| names[k.index()].as_str()).collect();
        out.push_str(&format!(
            "rule {} <{}> = {}\n",
            render_head(store, &n.base, r.state, r.symbol),
            g.join(", "),
            crate::model::render_rhs(store, &n.base, &r.rhs)
        ));
    }
    if let Some(a) = a {
        out.push_str(&format!(
            "axiom = {}\n",
            crate::model::render_axiom(store, &n.base, a)
        ));
    }
    out
}

/// Whether a name would be read back as a keyword or variable without quotes.
pub fn needs_quotes(s: &str) -> bool {
    is_reserved_word(s) || s.chars().any(|c| c.is_whitespace() || SPECIAL.contains(c))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TERN: &str = r#"
# ternary numbers
sigma   { g/2 f/2 0/0 1/0 2/0 }
delta_o { +/2 */2 EXP/2 3/0 0/0 1/0 2/0 }
delta_i { s/1 p/1 z/0 }
params 1
state q q' r
rule q(g(x1,x2), y1) = +(q(x1,y1), q'(x2,p(y1)))
rule q(f(x1,x2), y1) = +(r(x2,y1), q(x1,s(y1)))
rule q'(f(x1,x2), y1) = +(r(x1,y1), q'(x2,p(y1)))
rule S(i, y1) = *(i, EXP(3,y1)) where i in {0 1 2}, S in {q q' r}
axiom = q(x1, z)
"#;

    #[test]
    fn template_expands_to_twelve_rules() {
        let mut s = TermStore::new();
        let spec = parse_spec(&mut s, TERN).unwrap();
        let m = spec.mtt.unwrap();
        assert_eq!(m.states.len(), 3);
        assert_eq!(m.rules().len(), 12);
        assert_eq!(spec.axiom.unwrap().calls.len(), 1);
    }

    #[test]
    fn empty_body_is_a_syntax_error() {
        let mut s = TermStore::new();
        let text = "sigma { a/0 }\nparams 0\nstate q\nrule q(a) =\n";
        let e = parse_spec(&mut s, text).unwrap_err();
        assert_eq!(e.line, 4);
        assert!(e.message.contains("empty rule body"), "{e}");
    }

    #[test]
    fn nested_call_is_rejected() {
        let mut s = TermStore::new();
        let text = "sigma { f/1 a/0 }\ndelta_o { c/0 }\ndelta_i { h/1 }\nparams 1\nstate q\n\
                    rule q(f(x1), y1) = q(x1, h(q(x1, y1)))\n";
        let e = parse_spec(&mut s, text).unwrap_err();
        assert!(e.message.contains("basic"), "{e}");
        assert_eq!((e.line, e.col), (6, 29));
    }

    #[test]
    fn arity_and_unknown_symbols_have_locations() {
        let mut s = TermStore::new();
        let text = "sigma { f/1 }\ndelta_o { c/0 }\nparams 0\nstate q\nrule q(f(x1)) = c(c)\n";
        let e = parse_spec(&mut s, text).unwrap_err();
        assert_eq!((e.line, e.col), (5, 17));
        let mut s = TermStore::new();
        let text = "sigma { f/1 }\ndelta_o { c/0 }\nparams 0\nstate q\nrule q(f(x1)) = d\n";
        let e = parse_spec(&mut s, text).unwrap_err();
        assert!(e.message.contains("unknown output symbol `d`"));
    }

    #[test]
    fn out_of_range_parameter_is_left_to_validation() {
        let mut s = TermStore::new();
        let text =
            "sigma { f/1 a/0 }\nparams 1\nstate q\nrule q(f(x1), y2) = y2\nrule q(a, y1) = y1\n";
        let spec = parse_spec(&mut s, text).unwrap();
        let m = spec.mtt.unwrap();
        let r = crate::model::validate(&s, &m, crate::model::Mode::Total);
        assert_eq!(r.issues.len(), 1);
        assert_eq!(r.issues[0].kind, crate::model::IssueKind::ParamOutOfRange);
    }

    #[test]
    fn render_round_trips() {
        let mut s = TermStore::new();
        let spec = parse_spec(&mut s, TERN).unwrap();
        let m = spec.mtt.unwrap();
        let text = render_mtt(&s, &m, spec.axiom.as_ref());
        let mut s2 = TermStore::new();
        let back = parse_spec(&mut s2, &text).unwrap();
        let m2 = back.mtt.unwrap();
        assert_eq!(m2.states, m.states);
        assert_eq!(render_mtt(&s2, &m2, back.axiom.as_ref()), text);
    }

    #[test]
    fn automaton_block() {
        let mut s = TermStore::new();
        let text = "sigma { g/2 f/2 0/0 1/0 2/0 }\n\
            dta { states r0 r; init r0; trans r0(g) -> (r, r); trans r(f) -> (r,r);\n\
            trans r(0) -> (); trans r(1) -> (); trans r(2) -> (); }\n";
        let spec = parse_spec(&mut s, text).unwrap();
        let d = spec.dta.unwrap();
        assert_eq!(d.states, vec!["r0".to_string(), "r".to_string()]);
        assert_eq!(d.trans.len(), 5);
        let again = render_dta(&s, &d);
        let mut s2 = TermStore::new();
        let d2 = parse_spec(&mut s2, &again).unwrap().dta.unwrap();
        assert_eq!(d2.trans.len(), 5);
    }

    #[test]
    fn quoted_names_and_comments() {
        let mut s = TermStore::new();
        let text = "sigma { \"x1\"/0 } # a symbol that looks like a variable\n\
                    delta_o { \"a b\"/0 }\nparams 0\nstate q\nrule q(\"x1\") = \"a b\"\n";
        let spec = parse_spec(&mut s, text).unwrap();
        let m = spec.mtt.unwrap();
        let out = render_mtt(&s, &m, None);
        assert!(out.contains("rule q(\"x1\") = \"a b\""), "{out}");
    }
}
