//! Command-line front end. [`run`] returns the exit code and the report so
//! that it can be tested without spawning a process.
//!
//! Exit codes: 0 success or positive verdict, 1 negative verdict, 2 usage or
//! input error.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::amalgam::{amalgamate, Embedding};
use crate::dommonoid::{class_of_tuple, AnyElement, Mode};
use crate::expansion::{decorate_random, parse_formula, validate_expansion, Signature, Structure, TameContext};
use crate::io::{structure_to_json, to_dot, StructureDoc};
use crate::qftype::{
    enumerate_extensions, meet_witness, qf_type_of, wb_check, Constraint, EnumOptions, Gen, QfError, QfType,
};
use crate::symtype::{classify_point, is_equidominant, relate};
use crate::tree::{random_meet_closed, random_tree_with, validate, MeetTree, Order};

#[derive(Parser, Debug)]
#[command(name = "meettree", about = "Dense meet-trees, their cone-expansions, types and domination monoid")]
struct Cli {
    /// Emit machine-readable JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check a tree file, including the open-cone axioms for its relations.
    Validate { file: String },
    /// Generate a random tree, optionally with a base and a random relation.
    Gen(GenArgs),
    /// Print the meet of two nodes.
    Meet { file: String, a: String, b: String },
    /// Print the closure of a set of nodes under meets.
    Closure {
        file: String,
        #[arg(required = true)]
        nodes: Vec<String>,
    },
    /// Quantifier-free type of a tuple over the base.
    Qftype(QfArgs),
    /// Finite witness making the base plus a tuple closed under meets.
    Witness {
        file: String,
        #[arg(long)]
        tuple: String,
    },
    /// Reconstruct a pair type from its three pieces and compare.
    WbCheck(WbArgs),
    /// Enumerate the types of new tuples over the base.
    Enumerate(EnumArgs),
    /// Check or search for a tameness witness of a formula.
    Tame(TameArgs),
    /// Kind of the type of a node over the base.
    Classify {
        file: String,
        node: String,
        /// Compare with the type of this node.
        #[arg(long)]
        against: Option<String>,
    },
    /// Domination-monoid arithmetic.
    Monoid {
        #[command(subcommand)]
        op: MonoidCmd,
    },
    /// Amalgamate two trees over a common subtree.
    Amalgamate(AmalgamArgs),
    /// Write a tree file as canonical JSON (the default, or `--json`) or DOT.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Size of a random meet-closed base containing the root.
    #[arg(long, default_value_t = 0)]
    base: usize,
    /// Name of a symmetric relation to decorate the tree with.
    #[arg(long)]
    relation: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
}

#[derive(Args, Debug)]
struct QfArgs {
    file: String,
    #[arg(long)]
    tuple: String,
    /// Base nodes; defaults to the file's base.
    #[arg(long)]
    base: Option<String>,
}

#[derive(Args, Debug)]
struct WbArgs {
    #[arg(long)]
    file: String,
    #[arg(long)]
    tuple1: String,
    #[arg(long)]
    tuple2: String,
    /// Also enumerate every completion of the three pieces.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args, Debug)]
struct EnumArgs {
    file: String,
    #[arg(long)]
    vars: usize,
    #[arg(long)]
    budget: Option<usize>,
    /// Variables required to lie outside the base.
    #[arg(long = "new", value_delimiter = ',')]
    new: Vec<usize>,
    /// Order constraints such as `x0 > g` or `x0^a = g`; `||` means incomparable.
    #[arg(long = "order")]
    order: Vec<String>,
    /// A type file constraining the first variables.
    #[arg(long = "type")]
    ty: Option<String>,
}

#[derive(Args, Debug)]
struct TameArgs {
    file: String,
    #[arg(long)]
    formula: String,
    /// Candidate witness to check; searches for one when absent.
    #[arg(long)]
    witness: Option<String>,
}

#[derive(Subcommand, Debug)]
enum MonoidCmd {
    Mul { a: String, b: String },
    Leq { a: String, b: String },
    Wort { a: String, b: String },
    Class {
        file: String,
        #[arg(long)]
        tuple: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Pure)]
        mode: ModeArg,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Pure,
    Expansion,
}

#[derive(Args, Debug)]
struct AmalgamArgs {
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
    #[arg(long)]
    c: String,
    /// Embedding of A into B as `a1=b1,a2=b2`; identity by default.
    #[arg(long)]
    ab: Option<String>,
    #[arg(long)]
    ac: Option<String>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    file: String,
    #[arg(long)]
    dot: bool,
    /// Write to this path instead of stdout.
    #[arg(long)]
    out: Option<String>,
}

/// An error with a kind tag for JSON reports.
struct Failure {
    kind: String,
    message: String,
    details: Value,
}

impl Failure {
    fn new(kind: &str, message: impl Into<String>) -> Self {
        Failure {
            kind: kind.into(),
            message: message.into(),
            details: Value::Null,
        }
    }
}

fn qf_failure(e: QfError) -> Failure {
    let details = match &e {
        QfError::CutUncovered { coordinate, node, cut } => {
            json!({ "coordinate": coordinate, "node": node, "cut": cut })
        }
        QfError::BudgetTooSmall { budget, needed } => json!({ "budget": budget, "needed": needed }),
        QfError::SearchLimit(n) => json!({ "states": n }),
        _ => Value::Null,
    };
    let kind = format!("{e:?}");
    let kind = kind.split(['(', ' ', '{']).next().unwrap_or("QfError");
    Failure {
        kind: kind.to_string(),
        message: e.to_string(),
        details,
    }
}

macro_rules! fail_from {
    ($($t:ty => $kind:literal),* $(,)?) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::new($kind, e.to_string())
            }
        }
    )*};
}

fail_from! {
    crate::io::IoError => "InputError",
    crate::tree::TreeError => "TreeError",
    crate::expansion::ExpansionError => "ExpansionError",
    crate::expansion::formula::FormulaError => "FormulaError",
    crate::expansion::tame::TameError => "TameError",
    crate::symtype::SymError => "SymError",
    crate::dommonoid::MonoidError => "MonoidError",
}

impl From<QfError> for Failure {
    fn from(e: QfError) -> Self {
        qf_failure(e)
    }
}

/// Report text and whether the verdict is positive.
struct Outcome {
    text: String,
    ok: bool,
}

impl Outcome {
    fn ok(text: impl Into<String>) -> Self {
        Outcome { text: text.into(), ok: true }
    }

    fn verdict(text: impl Into<String>, ok: bool) -> Self {
        Outcome { text: text.into(), ok }
    }
}

fn read(path: &str) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new("InputError", format!("cannot read `{path}`: {e}")))
}

fn load(path: &str) -> Result<Structure, Failure> {
    Ok(StructureDoc::parse(&read(path)?)?.to_structure()?)
}

fn list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("values always serialize")
}

fn base_of(s: &Structure, given: Option<&str>) -> Result<BTreeSet<usize>, Failure> {
    match given {
        Some(b) => Ok(s.tree.indices(&list(b))?),
        None => Ok(s.tree.base().clone()),
    }
}

fn qf_json(q: &QfType) -> Result<Value, Failure> {
    Ok(serde_json::to_value(q.to_json_value()?).expect("types always serialize"))
}

fn parse_term(s: &str) -> Vec<Gen> {
    s.split('^')
        .map(str::trim)
        .map(|g| match g.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            Some(i) if g[1..].bytes().all(|b| b.is_ascii_digit()) => Gen::Var(i),
            _ => Gen::Param(g.to_string()),
        })
        .collect()
}

fn parse_order(s: &str) -> Result<Constraint, Failure> {
    for (op, rel) in [("||", Order::Incomparable), ("<", Order::Lt), (">", Order::Gt), ("=", Order::Eq)] {
        if let Some((l, r)) = s.split_once(op) {
            return Ok(Constraint::Order {
                left: parse_term(l),
                right: parse_term(r),
                rel,
            });
        }
    }
    Err(Failure::new("UsageError", format!("cannot read order constraint `{s}`")))
}

fn parse_embedding(s: Option<&str>, a: &MeetTree) -> Result<Embedding, Failure> {
    let Some(s) = s else {
        return Ok(crate::amalgam::identity(a));
    };
    list(s)
        .into_iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Failure::new("UsageError", format!("bad embedding entry `{kv}`")))
        })
        .collect()
}

fn element(arg: &str) -> Result<AnyElement, Failure> {
    let text = if arg.trim_start().starts_with('{') { arg.to_string() } else { read(arg)? };
    Ok(AnyElement::from_json(&text)?)
}

fn execute(cmd: Cmd, as_json: bool) -> Result<Outcome, Failure> {
    match cmd {
        Cmd::Validate { file } => {
            let doc = StructureDoc::parse(&read(&file)?)?;
            if let Err(v) = validate(&doc.spec()) {
                let msg = format!("violation: {v}");
                return Ok(Outcome::verdict(
                    if as_json { pretty(&json!({ "ok": false, "violation": v.to_string() })) } else { msg },
                    false,
                ));
            }
            let s = doc.to_structure()?;
            match validate_expansion(&s) {
                Ok(()) => Ok(Outcome::ok(if as_json { pretty(&json!({ "ok": true })) } else { "ok".into() })),
                Err(v) => Ok(Outcome::verdict(
                    if as_json {
                        pretty(&json!({ "ok": false, "violation": v.to_string() }))
                    } else {
                        format!("violation: {v}")
                    },
                    false,
                )),
            }
        }
        Cmd::Gen(g) => {
            let seed = g
                .seed
                .ok_or_else(|| Failure::new("UsageError", "randomized commands require --seed"))?;
            if g.nodes == 0 {
                return Err(crate::tree::TreeError::ZeroNodes.into());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_tree_with(g.nodes, &mut rng);
            let t = if g.base > 0 {
                t.with_base_idx(random_meet_closed(&t, g.base, true, &mut rng))?
            } else {
                t
            };
            let s = match &g.relation {
                Some(r) => {
                    let sig = Signature::new(vec![crate::expansion::RelSym::symmetric(r)])?;
                    decorate_random(&t, &sig, g.density, seed)?.0
                }
                None => Structure::pure(t),
            };
            Ok(Outcome::ok(structure_to_json(&s)))
        }
        Cmd::Meet { file, a, b } => {
            let s = load(&file)?;
            let m = s.tree.meet(&a, &b)?;
            Ok(Outcome::ok(if as_json { pretty(&json!({ "meet": m })) } else { m }))
        }
        Cmd::Closure { file, nodes } => {
            let s = load(&file)?;
            let cl: Vec<String> = s.tree.meet_closure(&nodes)?.into_iter().collect();
            Ok(Outcome::ok(if as_json { pretty(&json!({ "closure": cl })) } else { cl.join(" ") }))
        }
        Cmd::Qftype(q) => {
            let s = load(&q.file)?;
            let base = base_of(&s, q.base.as_deref())?;
            let b = s.tree.index_list(&list(&q.tuple))?;
            let ty = qf_type_of(&s, &base, &b)?;
            Ok(Outcome::ok(if as_json { pretty(&qf_json(&ty)?) } else { ty.render() }))
        }
        Cmd::Witness { file, tuple } => {
            let s = load(&file)?;
            let b = s.tree.index_list(&list(&tuple))?;
            let w = meet_witness(&s.tree, s.tree.base(), &b)?;
            Ok(Outcome::ok(if as_json {
                pretty(&json!({ "d": w.d, "c": w.c, "anchors": w.a_map }))
            } else {
                let mut out = format!("d: [{}]\nc: [{}]\n", w.d.join(", "), w.c.join(", "));
                for (e, a) in &w.a_map {
                    let _ = writeln!(out, "anchor({e}) = {a}");
                }
                out
            }))
        }
        Cmd::WbCheck(w) => {
            let s = load(&w.file)?;
            let b0 = s.tree.index_list(&list(&w.tuple1))?;
            let b1 = s.tree.index_list(&list(&w.tuple2))?;
            let opts = w.oracle.then(|| EnumOptions {
                budget: w.budget,
                ..Default::default()
            });
            let rep = wb_check(&s, s.tree.base(), &b0, &b1, opts)?;
            let agree = rep.agree();
            let verdict = if agree { "AGREE" } else { "DISAGREE" };
            let text = if as_json {
                pretty(&json!({
                    "verdict": verdict,
                    "c": rep.c,
                    "reconstructed": qf_json(&rep.reconstructed)?,
                    "direct": qf_json(&rep.direct)?,
                    "completions": rep.completions.as_ref().map(Vec::len),
                }))
            } else {
                let mut out = format!("{verdict}\n");
                if let Some(c) = &rep.completions {
                    let _ = writeln!(out, "completions: {}", c.len());
                }
                if !agree {
                    let _ = write!(out, "reconstructed:\n{}direct:\n{}", rep.reconstructed.render(), rep.direct.render());
                }
                out
            };
            Ok(Outcome::verdict(text, agree))
        }
        Cmd::Enumerate(e) => {
            let s = load(&e.file)?;
            let base = if s.tree.base().is_empty() {
                s.clone()
            } else {
                s.restrict(s.tree.base())?.0
            };
            let mut cs: Vec<Constraint> = e.new.iter().map(|&v| Constraint::NewPoint(v)).collect();
            for o in &e.order {
                cs.push(parse_order(o)?);
            }
            if let Some(path) = &e.ty {
                let qf = QfType::from_json(&read(path)?)?;
                cs.push(Constraint::Type {
                    vars: (0..qf.vars()).collect(),
                    qf,
                });
            }
            let opts = EnumOptions {
                budget: e.budget,
                ..Default::default()
            };
            let all = enumerate_extensions(&base, e.vars, &cs, opts)?;
            Ok(Outcome::ok(if as_json {
                let v: Result<Vec<Value>, Failure> = all.iter().map(qf_json).collect();
                pretty(&json!({ "count": all.len(), "types": v? }))
            } else {
                let mut out = format!("{} types\n", all.len());
                for (i, q) in all.iter().enumerate() {
                    let _ = write!(out, "-- type {i}\n{}", q.render());
                }
                out
            }))
        }
        Cmd::Tame(t) => {
            let s = load(&t.file)?;
            let f = parse_formula(&t.formula)?;
            let ctx = TameContext::new(&s)?;
            let (rep, in_closure) = match &t.witness {
                Some(w) => (ctx.check(&f, &list(w))?, None),
                None => {
                    let (r, c) = ctx.search(&f)?;
                    (r, Some(c))
                }
            };
            let ok = rep.ok();
            let text = if as_json {
                let cx = rep.counterexample.as_ref().map(|c| {
                    json!({
                        "point": c.point,
                        "failing_node": c.failing_node,
                        "failing_extension": c.failing_extension.as_ref().and_then(|q| q.to_json_value().ok()),
                    })
                });
                pretty(&json!({
                    "witness": rep.witness,
                    "checked": rep.checked,
                    "counterexample": cx,
                    "in_parameter_closure": in_closure,
                }))
            } else {
                let mut out = format!("witness: [{}]\nchecked: {}\n", rep.witness.join(", "), rep.checked);
                match &rep.counterexample {
                    None => out.push_str("tame\n"),
                    Some(c) => {
                        let _ = writeln!(out, "counterexample at {}", c.point);
                        if let Some(n) = &c.failing_node {
                            let _ = writeln!(out, "  fails at existing node {n}");
                        }
                        if let Some(q) = &c.failing_extension {
                            let _ = write!(out, "  fails at a new point:\n{}", q.render());
                        }
                    }
                }
                out
            };
            Ok(Outcome::verdict(text, ok))
        }
        Cmd::Classify { file, node, against } => {
            let s = load(&file)?;
            let m = s.tree.base();
            let p = classify_point(&s.tree, m, s.tree.idx(&node)?)?;
            match against {
                None => Ok(Outcome::ok(if as_json { p.to_json() } else { p.to_string() })),
                Some(other) => {
                    let q = classify_point(&s.tree, m, s.tree.idx(&other)?)?;
                    let (r, e) = (relate(&p, &q), is_equidominant(&p, &q));
                    Ok(Outcome::ok(if as_json {
                        pretty(&json!({ "p": p, "q": q, "relation": r, "equidominant": e }))
                    } else {
                        format!("{p}\n{q}\n{r:?}\nequidominant: {e:?}")
                    }))
                }
            }
        }
        Cmd::Monoid { op } => match op {
            MonoidCmd::Mul { a, b } => {
                let u = element(&a)?.mul(&element(&b)?)?;
                Ok(Outcome::ok(if as_json { u.to_json() } else { u.render() }))
            }
            MonoidCmd::Leq { a, b } => {
                let v = element(&a)?.leq(&element(&b)?)?;
                Ok(Outcome::verdict(v.to_string(), v))
            }
            MonoidCmd::Wort { a, b } => {
                let v = element(&a)?.wort(&element(&b)?)?;
                Ok(Outcome::verdict(v.to_string(), v))
            }
            MonoidCmd::Class { file, tuple, mode } => {
                let s = load(&file)?;
                let b = s.tree.index_list(&list(&tuple))?;
                let mode = match mode {
                    ModeArg::Pure => Mode::Pure,
                    ModeArg::Expansion => Mode::Expansion,
                };
                let u = class_of_tuple(&s, s.tree.base(), &b, mode)?;
                Ok(Outcome::ok(if as_json { u.to_json() } else { u.render() }))
            }
        },
        Cmd::Amalgamate(g) => {
            let (a, b, c) = (load(&g.a)?.tree, load(&g.b)?.tree, load(&g.c)?.tree);
            let e_ab = parse_embedding(g.ab.as_deref(), &a)?;
            let e_ac = parse_embedding(g.ac.as_deref(), &a)?;
            let d = amalgamate(&a, &b, &c, &e_ab, &e_ac)?;
            let tree: Value = serde_json::from_str(&structure_to_json(&Structure::pure(d.tree))).unwrap();
            Ok(Outcome::ok(pretty(&json!({
                "tree": tree,
                "from_b": d.from_b,
                "from_c": d.from_c,
            }))))
        }
        Cmd::Export(x) => {
            let s = load(&x.file)?;
            let text = if x.dot { to_dot(&s.tree) } else { structure_to_json(&s) };
            match x.out {
                Some(path) => {
                    fs::write(&path, &text)
                        .map_err(|e| Failure::new("OutputError", format!("cannot write `{path}`: {e}")))?;
                    Ok(Outcome::ok(format!("wrote {path}")))
                }
                None => Ok(Outcome::ok(text)),
            }
        }
    }
}

/// Runs one command line (including the program name) and returns the exit
/// code with everything meant for stdout.
pub fn run<I, T>(args: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            return (code, e.to_string());
        }
    };
    let as_json = cli.json;
    match execute(cli.cmd, as_json) {
        Ok(o) => {
            let mut text = o.text;
            if !text.ends_with('\n') {
                text.push('\n');
            }
            (if o.ok { 0 } else { 1 }, text)
        }
        Err(f) => {
            let text = if as_json {
                pretty(&json!({ "error": { "kind": f.kind, "message": f.message, "details": f.details } })) + "\n"
            } else {
                format!("error: {}\n", f.message)
            };
            (2, text)
        }
    }
}
