use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use mtt_core::applications::{decide_partial, domain_dta, dta_equiv, remove_lookahead, totalize};
use mtt_core::earliest::{compute_prefixes, earliest_transform};
use mtt_core::equiv::{decide, Coverage, DecideError, DecideOptions, Reason, Verdict};
use mtt_core::model::{
    dta_analyze, product_annotate, validate, validate_axiom, Axiom, Dta, Evaluator, IssueKind,
    Mode, ModelError, Mtt, ValidationReport,
};
use mtt_core::oracle::{oracle_decide, oracle_decide_partial, EnumBudget, OracleOutcome};
use mtt_core::syntax::{
    parse_spec, parse_tree, parse_tree_list, render_dta, render_dta_block, render_mtt, SpecFile,
};
use mtt_core::terms::{SymbolClass, TermId, TermStore};

#[derive(Parser)]
#[command(
    name = "mtt-equiv",
    version,
    about = "Equivalence of macro tree transducers"
)]
struct Cli {
    /// Human-readable output instead of JSON.
    #[arg(long, global = true)]
    text: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a transducer or automaton file.
    Validate {
        file: PathBuf,
        /// Accept transducers with missing rules.
        #[arg(long)]
        partial: bool,
    },
    /// Run a transducer on one input tree.
    Eval {
        file: PathBuf,
        #[arg(long)]
        input: String,
        /// Ground parameter values; evaluates a single state instead of the axiom.
        #[arg(long, value_delimiter = ',')]
        params: Option<Vec<String>>,
        /// State to evaluate with `--params` (default: the first state).
        #[arg(long)]
        state: Option<String>,
    },
    /// Print the output prefix of every state.
    Prefixes {
        file: PathBuf,
        #[arg(long)]
        dta: Option<PathBuf>,
    },
    /// Write the earliest form of a transducer.
    Earliest {
        file: PathBuf,
        #[arg(long)]
        dta: Option<PathBuf>,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Decide whether two transducers are equivalent.
    Equiv {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        dta: Option<PathBuf>,
        /// Include the per-pair conditions.
        #[arg(long)]
        explain: bool,
        /// Also compare against exhaustive enumeration up to this height.
        #[arg(long, value_name = "H")]
        oracle_check: Option<usize>,
        /// Compute every state pair instead of the ones reachable from the axioms.
        #[arg(long)]
        full: bool,
    },
    /// Compare two transducers on all inputs up to a height.
    Oracle {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        dta: Option<PathBuf>,
    },
    /// Add a bottom output for every missing rule.
    Totalize {
        file: PathBuf,
        #[arg(long)]
        bottom: String,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Write the automaton of inputs on which a transducer is defined.
    Domain {
        file: PathBuf,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Decide whether two automata accept the same language.
    DtaEquiv { first: PathBuf, second: PathBuf },
    /// Encode the look-ahead of two transducers into their input alphabet.
    RemoveLookahead {
        first: PathBuf,
        second: PathBuf,
        /// Writes PREFIX.1.mtt, PREFIX.2.mtt and PREFIX.dta.
        #[arg(long = "o-prefix", value_name = "PREFIX")]
        o_prefix: PathBuf,
    },
}

struct Report {
    code: u8,
    json: Value,
    text: String,
}

impl Report {
    fn ok(json: Value, text: String) -> Self {
        Report {
            code: 0,
            json,
            text,
        }
    }
}

enum Failure {
    Usage(String),
    Internal(String),
}

impl Failure {
    fn report(self) -> Report {
        let (code, kind, message) = match self {
            Failure::Usage(m) => (2, "usage", m),
            Failure::Internal(m) => (3, "internal", m),
        };
        Report {
            code,
            json: json!({ "error": kind, "message": message }),
            text: format!("error: {message}"),
        }
    }
}

impl From<DecideError> for Failure {
    fn from(e: DecideError) -> Self {
        match e {
            DecideError::Model(_) | DecideError::AlphabetMismatch => Failure::Usage(e.to_string()),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

type Res<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut store = TermStore::new();
    let report = run(&mut store, cli.command).unwrap_or_else(Failure::report);
    let body = if cli.text {
        report.text
    } else {
        serde_json::to_string_pretty(&report.json).expect("values serialize")
    };
    let _ = writeln!(io::stdout().lock(), "{body}");
    ExitCode::from(report.code)
}

fn run(store: &mut TermStore, command: Command) -> Res<Report> {
    match command {
        Command::Validate { file, partial } => cmd_validate(store, &file, partial),
        Command::Eval {
            file,
            input,
            params,
            state,
        } => cmd_eval(store, &file, &input, params, state),
        Command::Prefixes { file, dta } => cmd_prefixes(store, &file, dta.as_deref()),
        Command::Earliest { file, dta, output } => {
            cmd_earliest(store, &file, dta.as_deref(), &output)
        }
        Command::Equiv {
            first,
            second,
            dta,
            explain,
            oracle_check,
            full,
        } => {
            let opts = DecideOptions {
                coverage: if full {
                    Coverage::Full
                } else {
                    Coverage::Demand
                },
                explain,
                ..DecideOptions::default()
            };
            cmd_equiv(store, &first, &second, dta.as_deref(), opts, oracle_check)
        }
        Command::Oracle {
            first,
            second,
            height,
            dta,
        } => cmd_oracle(store, &first, &second, height, dta.as_deref()),
        Command::Totalize {
            file,
            bottom,
            output,
        } => cmd_totalize(store, &file, &bottom, &output),
        Command::Domain { file, output } => cmd_domain(store, &file, &output),
        Command::DtaEquiv { first, second } => cmd_dta_equiv(store, &first, &second),
        Command::RemoveLookahead {
            first,
            second,
            o_prefix,
        } => cmd_remove_lookahead(store, &first, &second, &o_prefix),
    }
}

fn read(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Res<()> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load(store: &mut TermStore, path: &Path) -> Res<SpecFile> {
    let text = read(path)?;
    parse_spec(store, &text).map_err(|e| Failure::Usage(format!("{}:{e}", path.display())))
}

fn load_mtt(store: &mut TermStore, path: &Path) -> Res<(Mtt, Axiom, Option<Dta>)> {
    let spec = load(store, path)?;
    match (spec.mtt, spec.axiom) {
        (Some(m), Some(a)) => Ok((m, a, spec.dta)),
        (Some(_), None) => Err(Failure::Usage(format!("{}: no axiom", path.display()))),
        _ => Err(Failure::Usage(format!("{}: no transducer", path.display()))),
    }
}

fn load_dta(store: &mut TermStore, path: &Path) -> Res<Dta> {
    load(store, path)?
        .dta
        .ok_or_else(|| Failure::Usage(format!("{}: no dta block", path.display())))
}

/// The automaton from `--dta`, else the one in the transducer file, else
/// the trivial one.
fn pick_dta(
    store: &mut TermStore,
    flag: Option<&Path>,
    inline: Option<Dta>,
    m: &Mtt,
) -> Res<(Dta, bool)> {
    match (flag, inline) {
        (Some(p), _) => Ok((load_dta(store, p)?, true)),
        (None, Some(d)) => Ok((d, true)),
        (None, None) => Ok((Dta::trivial(store, &m.sigma), false)),
    }
}

fn analyze(store: &mut TermStore, d: &Dta) -> Res<Dta> {
    dta_analyze(store, d).map_err(|e| Failure::Usage(e.to_string()))
}

fn check(store: &TermStore, m: &Mtt, a: &Axiom, mode: Mode) -> ValidationReport {
    let mut report = validate(store, m, mode);
    report.issues.extend(validate_axiom(store, m, a).issues);
    report
}

fn only_missing_rules(report: &ValidationReport) -> bool {
    report
        .issues
        .iter()
        .all(|i| i.kind == IssueKind::MissingRule)
}

fn invalid(report: &ValidationReport) -> Failure {
    Failure::Usage(format!("invalid transducer:\n{report}"))
}

fn cmd_validate(store: &mut TermStore, path: &Path, partial: bool) -> Res<Report> {
    let spec = load(store, path)?;
    let mut issues = Vec::new();
    let mut notes = Vec::new();
    if let Some(m) = &spec.mtt {
        let mode = if partial { Mode::Partial } else { Mode::Total };
        let relative = !partial && spec.dta.is_some();
        let mut report = validate(store, m, if relative { Mode::Partial } else { mode });
        if let Some(a) = &spec.axiom {
            report.issues.extend(validate_axiom(store, m, a).issues);
        }
        issues.extend(report.issues.iter().map(|i| json!(i)));
        notes.push(report.to_string());
        if let (true, true, Some(a)) = (relative, report.is_ok(), &spec.axiom) {
            let d = analyze(store, spec.dta.as_ref().expect("relative implies a dta"))?;
            if let Err(e) = product_annotate(store, m, a, &d, Mode::Total) {
                issues.push(json!({ "kind": "not_total_relative", "location": "", "message": e.to_string() }));
                notes.push(e.to_string());
            }
        }
    } else if let Some(d) = &spec.dta {
        if let Err(e) = dta_analyze(store, d) {
            issues
                .push(json!({ "kind": "empty_domain", "location": "", "message": e.to_string() }));
            notes.push(e.to_string());
        }
    } else {
        return Err(Failure::Usage(format!(
            "{}: nothing to validate",
            path.display()
        )));
    }
    let valid = issues.is_empty();
    let text = if valid {
        "valid".to_string()
    } else {
        notes.retain(|n| !n.is_empty());
        notes.join("\n")
    };
    Ok(Report {
        code: if valid { 0 } else { 2 },
        json: json!({ "valid": valid, "issues": issues }),
        text,
    })
}

fn cmd_eval(
    store: &mut TermStore,
    path: &Path,
    input: &str,
    params: Option<Vec<String>>,
    state: Option<String>,
) -> Res<Report> {
    let spec = load(store, path)?;
    let m = spec
        .mtt
        .ok_or_else(|| Failure::Usage(format!("{}: no transducer", path.display())))?;
    let report = validate(store, &m, Mode::Partial);
    if !report.is_ok() {
        return Err(invalid(&report));
    }
    let t = parse_tree(store, &m.sigma, SymbolClass::Input, input)
        .map_err(|e| Failure::Usage(format!("--input:{e}")))?;
    let mut eval = Evaluator::new(&m);
    let out = if params.is_some() || state.is_some() {
        let values = parse_params(store, &m, params.unwrap_or_default())?;
        let q = match &state {
            Some(name) => m
                .state_named(name)
                .ok_or_else(|| Failure::Usage(format!("unknown state `{name}`")))?,
            None => m
                .state_ids()
                .next()
                .ok_or_else(|| Failure::Usage("transducer has no states".into()))?,
        };
        eval.state(store, q, t, &values)
    } else {
        let a = spec
            .axiom
            .ok_or_else(|| Failure::Usage(format!("{}: no axiom", path.display())))?;
        let report = validate_axiom(store, &m, &a);
        if !report.is_ok() {
            return Err(invalid(&report));
        }
        eval.axiom(store, &a, t)
    };
    match out {
        Ok(o) => {
            let shown = store.render(o);
            Ok(Report::ok(json!({ "output": shown }), shown))
        }
        Err(e) => Ok(Report {
            code: 1,
            json: json!({ "output": null, "undefined": e.to_string() }),
            text: format!("undefined: {e}"),
        }),
    }
}

fn parse_params(store: &mut TermStore, m: &Mtt, params: Vec<String>) -> Res<Vec<TermId>> {
    let text = params.join(",");
    let values = parse_tree_list(store, &m.delta_i, SymbolClass::Inner, &text)
        .map_err(|e| Failure::Usage(format!("--params:{e}")))?;
    if values.len() != m.params {
        return Err(Failure::Usage(format!(
            "expected {} parameter values, got {}",
            m.params,
            values.len()
        )));
    }
    Ok(values)
}

fn annotated(
    store: &mut TermStore,
    path: &Path,
    dta: Option<&Path>,
) -> Res<(Mtt, Axiom, mtt_core::model::StateMap, Dta, bool)> {
    let (m, a, inline) = load_mtt(store, path)?;
    let (raw, given) = pick_dta(store, dta, inline, &m)?;
    let report = check(store, &m, &a, Mode::Partial);
    if !report.is_ok() {
        return Err(invalid(&report));
    }
    let d = analyze(store, &raw)?;
    let (pm, pa, pi) = product_annotate(store, &m, &a, &d, Mode::Total)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok((pm, pa, pi, d, given))
}

fn cmd_prefixes(store: &mut TermStore, path: &Path, dta: Option<&Path>) -> Res<Report> {
    let (m, _, pi, d, _) = annotated(store, path, dta)?;
    let table =
        compute_prefixes(store, &m, &pi, &d).map_err(|e| Failure::Internal(e.to_string()))?;
    let mut map = serde_json::Map::new();
    let mut lines = Vec::new();
    for q in m.state_ids() {
        let shown = store.render_pattern(table.get(q));
        lines.push(format!("{}: {shown}", m.state_name(q)));
        map.insert(m.state_name(q).to_string(), Value::String(shown));
    }
    Ok(Report::ok(Value::Object(map), lines.join("\n")))
}

fn cmd_earliest(
    store: &mut TermStore,
    path: &Path,
    dta: Option<&Path>,
    output: &Path,
) -> Res<Report> {
    let (m, a, pi, d, given) = annotated(store, path, dta)?;
    let (e, ea, _, table) =
        earliest_transform(store, &m, &a, &pi, &d).map_err(|e| Failure::Internal(e.to_string()))?;
    let mut text = render_mtt(store, &e, Some(&ea));
    if given {
        text.push_str(&render_dta_block(store, &d));
    }
    write(output, &text)?;
    Ok(Report::ok(
        json!({
            "output": output.display().to_string(),
            "states": e.states.len(),
            "rules": e.rules().len(),
            "prefix_passes": table.passes,
        }),
        text,
    ))
}

fn reason_text(r: &Reason) -> String {
    match r {
        Reason::AxiomPattern { left, right } => format!("axiom outputs differ: {left} vs {right}"),
        Reason::CallCount { left, right } => format!("axiom call counts differ: {left} vs {right}"),
        Reason::Domain { witness } => format!("domains differ on {witness}"),
        Reason::PairCondition {
            index,
            left_state,
            right_state,
            condition,
        } => format!("call pair {index} ({left_state}, {right_state}) violates {condition}"),
    }
}

fn verdict_text(v: &Verdict) -> String {
    let mut out = if v.equivalent {
        "equivalent".to_string()
    } else {
        "inequivalent".to_string()
    };
    if let Some(r) = &v.reason {
        out.push_str(&format!("\nreason: {}", reason_text(r)));
    }
    if let Some(c) = &v.counterexample {
        out.push_str(&format!("\ncounterexample: {c}"));
    }
    if let (Some(r), Some(b)) = (v.rounds, v.bound) {
        out.push_str(&format!("\nstable after round {r} (bound {b})"));
    }
    for p in &v.pairs {
        out.push_str(&format!(
            "\n{}({}) ~ {}({}): {} [{}]",
            p.left_state,
            p.left_args.join(", "),
            p.right_state,
            p.right_args.join(", "),
            p.condition,
            if p.holds { "holds" } else { "fails" }
        ));
    }
    out
}

fn cmd_equiv(
    store: &mut TermStore,
    first: &Path,
    second: &Path,
    dta: Option<&Path>,
    opts: DecideOptions,
    oracle_check: Option<usize>,
) -> Res<Report> {
    let (m1, a1, inline) = load_mtt(store, first)?;
    let (m2, a2, _) = load_mtt(store, second)?;
    let (raw, given) = pick_dta(store, dta, inline, &m1)?;
    let mut partial = false;
    if !given {
        let (r1, r2) = (
            check(store, &m1, &a1, Mode::Total),
            check(store, &m2, &a2, Mode::Total),
        );
        for r in [&r1, &r2] {
            if !only_missing_rules(r) {
                return Err(invalid(r));
            }
        }
        partial = !r1.is_ok() || !r2.is_ok();
    }
    let verdict = if partial {
        decide_partial(store, (&m1, &a1), (&m2, &a2), opts)?
    } else {
        decide(store, (&m1, &a1), (&m2, &a2), &raw, opts)?
    };
    let mut json = json!(verdict);
    json["verdict"] = json!(if verdict.equivalent {
        "equivalent"
    } else {
        "inequivalent"
    });
    json["pipeline"] = json!(if partial { "partial" } else { "total" });
    let mut text = verdict_text(&verdict);
    let mut code = if verdict.equivalent { 0 } else { 1 };
    if let Some(h) = oracle_check {
        let budget = EnumBudget::height(h);
        let outcome = if partial {
            oracle_decide_partial(store, (&m1, &a1), (&m2, &a2), budget)
        } else {
            let d = analyze(store, &raw)?;
            oracle_decide(store, (&m1, &a1), (&m2, &a2), Some(&d), budget)
                .map_err(|e| Failure::Internal(e.to_string()))?
        };
        let (found, checked) = match outcome {
            OracleOutcome::Counterexample(t) => (Some(store.render(t)), None),
            OracleOutcome::AgreeUpToBudget { checked } => (None, Some(checked)),
        };
        let mismatch = verdict.equivalent && found.is_some();
        json["oracle"] = json!({
            "height": h,
            "counterexample": found,
            "checked": checked,
            "mismatch": mismatch,
        });
        match &found {
            Some(c) => text.push_str(&format!("\noracle (height {h}): counterexample {c}")),
            None => text.push_str(&format!("\noracle (height {h}): no difference")),
        }
        if mismatch {
            text.push_str("\nmismatch between decision procedure and oracle");
            code = 3;
        }
    }
    Ok(Report { code, json, text })
}

fn cmd_oracle(
    store: &mut TermStore,
    first: &Path,
    second: &Path,
    height: usize,
    dta: Option<&Path>,
) -> Res<Report> {
    let (m1, a1, inline) = load_mtt(store, first)?;
    let (m2, a2, _) = load_mtt(store, second)?;
    for (m, a) in [(&m1, &a1), (&m2, &a2)] {
        let r = check(store, m, a, Mode::Partial);
        if !r.is_ok() {
            return Err(invalid(&r));
        }
    }
    let budget = EnumBudget {
        max_height: height,
        max_count: usize::MAX,
    };
    let outcome = match (dta, inline) {
        (None, None) => oracle_decide_partial(store, (&m1, &a1), (&m2, &a2), budget),
        (flag, inline) => {
            let (raw, _) = pick_dta(store, flag, inline, &m1)?;
            let d = analyze(store, &raw)?;
            oracle_decide(store, (&m1, &a1), (&m2, &a2), Some(&d), budget)
                .map_err(|e| Failure::Usage(e.to_string()))?
        }
    };
    Ok(match outcome {
        OracleOutcome::Counterexample(t) => {
            let mut eval1 = Evaluator::new(&m1);
            let mut eval2 = Evaluator::new(&m2);
            let o1 = eval1.axiom(store, &a1, t).ok().map(|o| store.render(o));
            let o2 = eval2.axiom(store, &a2, t).ok().map(|o| store.render(o));
            let shown = store.render(t);
            Report {
                code: 1,
                text: format!(
                    "counterexample: {shown}\nfirst: {}\nsecond: {}",
                    o1.as_deref().unwrap_or("undefined"),
                    o2.as_deref().unwrap_or("undefined")
                ),
                json: json!({ "agree": false, "counterexample": shown, "first": o1, "second": o2 }),
            }
        }
        OracleOutcome::AgreeUpToBudget { checked } => Report::ok(
            json!({ "agree": true, "checked": checked, "height": height }),
            format!("agree on {checked} inputs of height at most {height}"),
        ),
    })
}

fn cmd_totalize(store: &mut TermStore, path: &Path, bottom: &str, output: &Path) -> Res<Report> {
    let (m, a, _) = load_mtt(store, path)?;
    let report = check(store, &m, &a, Mode::Partial);
    if !report.is_ok() {
        return Err(invalid(&report));
    }
    if m.delta_o.iter().any(|&s| store.sym_name(s) == bottom) {
        return Err(Failure::Usage(format!(
            "`{bottom}` is already an output symbol"
        )));
    }
    let t = totalize(store, &m, bottom).map_err(|e| Failure::Usage(e.to_string()))?;
    let text = render_mtt(store, &t, Some(&a));
    write(output, &text)?;
    Ok(Report::ok(
        json!({ "output": output.display().to_string(), "added_rules": t.rules().len() - m.rules().len() }),
        text,
    ))
}

fn cmd_domain(store: &mut TermStore, path: &Path, output: &Path) -> Res<Report> {
    let (m, a, _) = load_mtt(store, path)?;
    let report = check(store, &m, &a, Mode::Partial);
    if !report.is_ok() {
        return Err(invalid(&report));
    }
    let d = domain_dta(store, &m, &a);
    let empty = matches!(dta_analyze(store, &d), Err(ModelError::EmptyDomain));
    let text = render_dta(store, &d);
    write(output, &text)?;
    Ok(Report::ok(
        json!({ "output": output.display().to_string(), "states": d.states.len(), "empty": empty }),
        text,
    ))
}

fn cmd_dta_equiv(store: &mut TermStore, first: &Path, second: &Path) -> Res<Report> {
    let d1 = load_dta(store, first)?;
    let d2 = load_dta(store, second)?;
    let mut s1 = d1.sigma.clone();
    let mut s2 = d2.sigma.clone();
    s1.sort();
    s2.sort();
    if s1 != s2 {
        return Err(Failure::Usage(
            "the automata use different input alphabets".into(),
        ));
    }
    let a1 = dta_analyze(store, &d1).ok();
    let a2 = dta_analyze(store, &d2).ok();
    let witness = match (&a1, &a2) {
        (None, None) => None,
        (Some(d), None) | (None, Some(d)) => d.witness(d.init),
        (Some(x), Some(y)) => dta_equiv(store, x, y).witness,
    };
    let shown = witness.map(|t| store.render(t));
    let accepted_by_first = witness.map(|t| a1.as_ref().is_some_and(|d| d.accepts(store, t)));
    Ok(match shown {
        None => Report::ok(json!({ "equivalent": true }), "equivalent".into()),
        Some(w) => Report {
            code: 1,
            text: format!("languages differ on {w}"),
            json: json!({ "equivalent": false, "witness": w, "accepted_by_first": accepted_by_first }),
        },
    })
}

fn cmd_remove_lookahead(
    store: &mut TermStore,
    first: &Path,
    second: &Path,
    prefix: &Path,
) -> Res<Report> {
    let s1 = load(store, first)?;
    let s2 = load(store, second)?;
    let need = |s: SpecFile, p: &Path| {
        s.lookahead.zip(s.axiom).ok_or_else(|| {
            Failure::Usage(format!(
                "{}: needs a lookahead block and an axiom",
                p.display()
            ))
        })
    };
    let (n1, a1) = need(s1, first)?;
    let (n2, a2) = need(s2, second)?;
    let free = remove_lookahead(store, &n1, &n2).map_err(|e| Failure::Usage(e.to_string()))?;
    let base = prefix.display().to_string();
    let paths = [
        format!("{base}.1.mtt"),
        format!("{base}.2.mtt"),
        format!("{base}.dta"),
    ];
    let texts = [
        render_mtt(store, &free.first, Some(&a1)),
        render_mtt(store, &free.second, Some(&a2)),
        render_dta(store, &free.runs),
    ];
    for (p, t) in paths.iter().zip(&texts) {
        write(Path::new(p), t)?;
    }
    Ok(Report::ok(
        json!({ "first": paths[0], "second": paths[1], "dta": paths[2], "symbols": free.symbols.len() }),
        format!("wrote {}, {}, {}", paths[0], paths[1], paths[2]),
    ))
}
