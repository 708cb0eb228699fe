//! Command-line front end. `run` parses arguments, dispatches to the core
//! library and returns the process exit code: 0 on success, 1 for parse and
//! validation errors, 2 when a resource cap is hit, 3 when a predicate
//! oracle fails, 4 when a requested check finds a counterexample.

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, Write};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;

use hanfkit::dyndb::{parse_command, QueryState, UpdateOutcome};
use hanfkit::error::{Error, Result};
use hanfkit::evalsem::{equivalent_on_bounded, Assignment, Evaluator, Mode, Verdict};
use hanfkit::formula::{
    builtin_arity, infer_signature, metrics, parse_with, print, Expr, Predicate,
    PredicateCollection, Signature, SphereResolver,
};
use hanfkit::hnf::{block_depth, emit_arithmetic_in, fo_to_foc, simplify, Compiler};
use hanfkit::modelcheck::ModelChecker;
use hanfkit::richness::{find_gap, large_gaps_witness, smallest_q};
use hanfkit::structures::Structure;
use hanfkit::typecat::{CatalogStore, DEFAULT_CAP};

/// Exit code for a check that found a counterexample.
pub const EXIT_CHECK_FAILED: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "hanfkit",
    version,
    about = "Hanf normal forms and model checking on bounded-degree structures"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Catalog cap on k·ν_d(r); overrides HANFKIT_CAP.
    #[arg(long, global = true)]
    cap: Option<usize>,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Extra predicate NAME=SPEC, where SPEC is a built-in name such as up:01$1 or div3.
    #[arg(long = "pred", global = true, value_name = "NAME=SPEC")]
    preds: Vec<String>,
    /// Signature such as E/2,U/1; inferred from the inputs when absent.
    #[arg(long, global = true)]
    sig: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a formula or term directly on a structure.
    Eval(EvalArgs),
    /// Size, nqr, br, bw and free variables of a formula.
    Metrics(FormulaArg),
    /// Print the catalog Types(r, d, k).
    Types(TypesArgs),
    /// Compile a formula to Hanf normal form.
    Hnf(HnfArgs),
    /// Compare a formula with its compiled normal form on bounded structures.
    EquivCheck(EquivArgs),
    /// Model-check through the compiled normal form.
    Mc(McArgs),
    /// Dynamic query answering; commands are read from stdin.
    Dyn(DynArgs),
    /// Emit the arithmetic sentence over Hanf-tuple variables.
    ArithEmit(ArithArgs),
    /// Translate an FO formula into FOC with bounded width and rank.
    Fo2foc(Fo2focArgs),
    /// Build and verify the large-gaps witness vector.
    RichWitness(RichArgs),
    /// Search a window for a large gap of a unary predicate.
    GapScan(GapArgs),
}

#[derive(Args, Debug)]
struct FormulaArg {
    /// Formula file (s-expression).
    #[arg(short = 'f', long = "formula")]
    formula: String,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    f: FormulaArg,
    /// Structure file.
    #[arg(short = 's', long = "structure")]
    structure: String,
    /// Assignment x=3 or %k=2.
    #[arg(long = "set")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct TypesArgs {
    #[arg(short = 'd', long = "degree")]
    degree: usize,
    #[arg(short = 'r', long = "radius")]
    radius: usize,
    #[arg(short = 'k', long = "centres", default_value_t = 1)]
    centres: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Emit {
    Ast,
    Text,
    Arith,
}

#[derive(Args, Debug)]
struct HnfArgs {
    #[command(flatten)]
    f: FormulaArg,
    #[arg(short = 'd', long = "degree", default_value_t = 2)]
    degree: usize,
    /// Fold constants and duplicate disjuncts in the output.
    #[arg(long)]
    simplify: bool,
    #[arg(long, value_enum, default_value_t = Emit::Text)]
    emit: Emit,
    /// Type of the free variables, needed by --emit arith for formulas with free variables.
    #[arg(long = "type")]
    rho: Option<String>,
}

#[derive(Args, Debug)]
struct EquivArgs {
    #[command(flatten)]
    f: FormulaArg,
    #[arg(short = 'd', long = "degree", default_value_t = 2)]
    degree: usize,
    #[arg(long = "max-size", default_value_t = 4)]
    max_size: usize,
    /// Sample this many random structures instead of enumerating all.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct McArgs {
    #[command(flatten)]
    f: FormulaArg,
    #[arg(short = 's', long = "structure")]
    structure: String,
    #[arg(long = "set")]
    set: Vec<String>,
    /// Print the compiled form, sphere verdicts and Hanf tuples.
    #[arg(long)]
    explain: bool,
}

#[derive(Args, Debug)]
struct DynArgs {
    #[command(flatten)]
    f: FormulaArg,
    #[arg(short = 'd', long = "degree", default_value_t = 2)]
    degree: usize,
    /// Initial database in the structure file format (element ids become domain values).
    #[arg(long)]
    db: Option<String>,
}

#[derive(Args, Debug)]
struct ArithArgs {
    #[command(flatten)]
    f: FormulaArg,
    #[arg(short = 'd', long = "degree", default_value_t = 2)]
    degree: usize,
    #[arg(long = "type")]
    rho: Option<String>,
}

#[derive(Args, Debug)]
struct Fo2focArgs {
    #[command(flatten)]
    f: FormulaArg,
    /// Binding-rank bound n.
    #[arg(short = 'n', long = "rank")]
    rank: Option<usize>,
    /// Block width ℓ.
    #[arg(short = 'l', long = "width", default_value_t = 1)]
    width: usize,
}

#[derive(Args, Debug)]
struct RichArgs {
    #[arg(short = 'j', long)]
    j: usize,
    #[arg(short = 's', long)]
    s: usize,
    #[arg(short = 'b', long = "base")]
    b: u64,
    /// Defaults to the smallest admissible value.
    #[arg(short = 'q', long)]
    q: Option<u64>,
}

#[derive(Args, Debug)]
struct GapArgs {
    /// Unary predicate name, e.g. prime or up:0$01.
    #[arg(long = "predicate")]
    predicate: String,
    #[arg(long)]
    window: u64,
    #[arg(short = 'k', long, default_value_t = 2)]
    k: u64,
}

/// Line sink honouring the output format. Machine records are
/// `kind<TAB>key=value<TAB>...`.
struct Out<'a> {
    w: &'a mut dyn Write,
    format: Format,
}

impl Out<'_> {
    fn text(&mut self, s: &str) -> Result<()> {
        if self.format == Format::Text {
            self.line(s)?;
        }
        Ok(())
    }

    fn record(&mut self, kind: &str, fields: &[(&str, String)]) -> Result<()> {
        if self.format == Format::Machine {
            let mut s = kind.to_string();
            for (k, v) in fields {
                s.push('\t');
                s.push_str(k);
                s.push('=');
                s.push_str(&v.replace(['\t', '\n'], " "));
            }
            self.line(&s)?;
        }
        Ok(())
    }

    fn both(&mut self, text: &str, kind: &str, fields: &[(&str, String)]) -> Result<()> {
        self.text(text)?;
        self.record(kind, fields)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        let s = s.strip_suffix('\n').unwrap_or(s);
        writeln!(self.w, "{s}").map_err(io_err)
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::invalid(format!("i/o: {e}"))
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code. Diagnostics go to `err` as a single line.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let msg = e.to_string();
                    let first = msg.lines().next().unwrap_or("invalid arguments");
                    let _ = writeln!(err, "{first}");
                    1
                }
            };
        }
    };
    let mut o = Out {
        w: out,
        format: cli.global.format,
    };
    match dispatch(&cli, input, &mut o) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

/// Shared state derived from the global options.
struct Ctx {
    store: CatalogStore,
    preds: PredicateCollection,
    sig: Option<Signature>,
}

impl Ctx {
    fn new(g: &Global) -> Result<Self> {
        let cap = match g.cap {
            Some(0) => return Err(Error::invalid("--cap must be positive")),
            Some(c) => c,
            None => cap_from_env()?.unwrap_or(DEFAULT_CAP),
        };
        let mut preds = PredicateCollection::new();
        for spec in &g.preds {
            let (name, target) = spec
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("--pred expects NAME=SPEC, got {spec}")))?;
            let arity = builtin_arity(target)
                .ok_or_else(|| Error::invalid(format!("unknown predicate spec {target}")))?;
            let target = target.to_string();
            let base = PredicateCollection::new();
            let oracle = Arc::new(move |a: &[BigInt]| base.holds(&target, a));
            preds.register(Predicate::new(name, arity, oracle))?;
        }
        let sig = g.sig.as_deref().map(Signature::parse).transpose()?;
        Ok(Ctx {
            store: CatalogStore::new(cap),
            preds,
            sig,
        })
    }

    /// Signature from --sig, else inferred from the formula, widened by the
    /// relations a structure file declares.
    fn signature(&self, formula_text: &str) -> Result<Signature> {
        match &self.sig {
            Some(s) => Ok(s.clone()),
            None => infer_signature(formula_text),
        }
    }

    fn formula(&self, text: &str, sig: &Signature) -> Result<Expr> {
        parse_with(text, sig, &self.preds, &self.store.resolver(sig))
    }
}

/// `HANFKIT_CAP`, rejecting malformed values instead of ignoring them.
fn cap_from_env() -> Result<Option<usize>> {
    match std::env::var("HANFKIT_CAP") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(c) if c > 0 => Ok(Some(c)),
            _ => Err(Error::invalid(format!(
                "HANFKIT_CAP must be a positive integer, got {v:?}"
            ))),
        },
    }
}

fn read(path: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::invalid(format!("cannot read {path}: {e}")))
}

/// Loads formula and structure; the structure's declared relations are
/// merged into the signature before the formula is parsed.
fn load_pair(ctx: &Ctx, fpath: &str, spath: &str) -> Result<(Expr, Structure)> {
    let ftext = read(fpath)?;
    let base = ctx.signature(&ftext)?;
    let s = Structure::parse(&read(spath)?, Some(&base))?;
    let sig = s.sig().as_ref().clone();
    let phi = ctx.formula(&ftext, &sig)?;
    Ok((phi, s))
}

fn load_formula(ctx: &Ctx, fpath: &str) -> Result<(Expr, Signature)> {
    let text = read(fpath)?;
    let sig = ctx.signature(&text)?;
    Ok((ctx.formula(&text, &sig)?, sig))
}

fn parse_assignment(sets: &[String], s: &Structure) -> Result<Assignment> {
    let mut a = Assignment::new();
    for item in sets {
        let (var, val) = item
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("--set expects VAR=VALUE, got {item}")))?;
        if let Some(nv) = var.strip_prefix('%') {
            let k: BigInt = val
                .parse()
                .map_err(|_| Error::invalid(format!("bad number {val} for %{nv}")))?;
            a = a.set_num(nv, k);
        } else {
            let e: usize = val
                .parse()
                .map_err(|_| Error::invalid(format!("bad element {val} for {var}")))?;
            if e >= s.size() {
                return Err(Error::invalid(format!(
                    "element {e} outside the universe of size {}",
                    s.size()
                )));
            }
            a = a.set(var, e);
        }
    }
    Ok(a)
}

fn dispatch(cli: &Cli, input: &mut dyn BufRead, o: &mut Out<'_>) -> Result<i32> {
    let ctx = Ctx::new(&cli.global)?;
    match &cli.command {
        Command::Eval(a) => {
            let (phi, s) = load_pair(&ctx, &a.f.formula, &a.structure)?;
            let assign = parse_assignment(&a.set, &s)?;
            let v = Evaluator::new(&s, &ctx.preds).eval(&phi, &assign)?;
            o.both(&v.to_string(), "value", &[("value", v.to_string())])?;
        }
        Command::Metrics(a) => {
            let (phi, _) = load_formula(&ctx, &a.formula)?;
            let m = metrics(&phi);
            let join = |s: &std::collections::BTreeSet<String>, p: &str| {
                s.iter()
                    .map(|v| format!("{p}{v}"))
                    .collect::<Vec<_>>()
                    .join(",")
            };
            let (fs, fnum) = (join(&m.free_struct, ""), join(&m.free_num, "%"));
            o.text(&format!(
                "size {}\nnqr {}\nbr {}\nbw {}\nfree {{{fs}}} {{{fnum}}}",
                m.size, m.nqr, m.br, m.bw
            ))?;
            o.record(
                "metrics",
                &[
                    ("size", m.size.to_string()),
                    ("nqr", m.nqr.to_string()),
                    ("br", m.br.to_string()),
                    ("bw", m.bw.to_string()),
                    ("free_struct", fs),
                    ("free_num", fnum),
                ],
            )?;
        }
        Command::Types(a) => {
            let sig = ctx
                .sig
                .clone()
                .ok_or_else(|| Error::invalid("types needs --sig"))?;
            let cat = ctx.store.get(&sig, a.degree, a.radius, a.centres)?;
            o.text(&format!(
                "# Types(r={}, d={}, k={}) over {}: {} entries",
                a.radius,
                a.degree,
                a.centres,
                sig,
                cat.len()
            ))?;
            o.text(&cat.listing())?;
            for i in 0..cat.len() {
                let t = cat.entry(i);
                o.record(
                    "type",
                    &[
                        ("id", cat.type_id(i).to_string()),
                        ("size", t.size().to_string()),
                        ("code", format!("{:?}", t.code().0)),
                    ],
                )?;
            }
        }
        Command::Hnf(a) => {
            let (phi, sig) = load_formula(&ctx, &a.f.formula)?;
            if a.emit == Emit::Arith {
                return arith(&ctx, &phi, &sig, a.degree, a.rho.as_deref(), o);
            }
            let h = Compiler::new(&ctx.store, &sig, a.degree, &ctx.preds).compile(&phi)?;
            let expr = if a.simplify {
                simplify(&h.expr, &ctx.preds)
            } else {
                h.expr.clone()
            };
            let body = match a.emit {
                Emit::Ast => format!("{expr:#?}"),
                _ => print(&expr),
            };
            o.text(&body)?;
            o.record(
                "hnf",
                &[
                    ("d", h.d.to_string()),
                    ("locality_radius", h.locality_radius.to_string()),
                    ("formula", print(&expr)),
                ],
            )?;
        }
        Command::EquivCheck(a) => {
            let (phi, sig) = load_formula(&ctx, &a.f.formula)?;
            let h = Compiler::new(&ctx.store, &sig, a.degree, &ctx.preds).compile(&phi)?;
            let (mode, label) = match a.random {
                Some(n) => (
                    Mode::Random {
                        samples: n,
                        seed: a.seed,
                    },
                    format!("random {n} seed {}", a.seed),
                ),
                None => (Mode::Exhaustive, "exhaustive".to_string()),
            };
            let verdict =
                equivalent_on_bounded(&phi, &h.expr, &sig, a.degree, a.max_size, mode, &ctx.preds)?;
            match verdict {
                Verdict::Pass { structures, checks } => {
                    o.text(&format!("PASS {label} |A|<={}", a.max_size))?;
                    o.record(
                        "equiv",
                        &[
                            ("result", "pass".into()),
                            ("mode", label),
                            ("max_size", a.max_size.to_string()),
                            ("structures", structures.to_string()),
                            ("checks", checks.to_string()),
                        ],
                    )?;
                }
                Verdict::Fail(cx) => {
                    o.text(&format!(
                        "FAIL {label} |A|<={}\ncounterexample {cx}",
                        a.max_size
                    ))?;
                    o.record(
                        "equiv",
                        &[
                            ("result", "fail".into()),
                            ("mode", label),
                            ("assignment", cx.assignment.to_string()),
                            ("structure", cx.structure.to_text()),
                        ],
                    )?;
                    return Ok(EXIT_CHECK_FAILED);
                }
            }
        }
        Command::Mc(a) => {
            let (phi, s) = load_pair(&ctx, &a.f.formula, &a.structure)?;
            let assign = parse_assignment(&a.set, &s)?;
            let mut mc = ModelChecker::new(&ctx.store, &ctx.preds);
            let ex = mc.explain(&phi, &s, &assign)?;
            if a.explain {
                o.text(&ex.render())?;
            } else {
                o.text(&ex.result.to_string())?;
            }
            o.record(
                "mc",
                &[
                    ("result", ex.result.to_string()),
                    ("ops", ex.ops.to_string()),
                ],
            )?;
        }
        Command::Dyn(a) => return dynamic(&ctx, a, input, o),
        Command::ArithEmit(a) => {
            let (phi, sig) = load_formula(&ctx, &a.f.formula)?;
            return arith(&ctx, &phi, &sig, a.degree, a.rho.as_deref(), o);
        }
        Command::Fo2foc(a) => {
            let (phi, _) = load_formula(&ctx, &a.f.formula)?;
            let n = match a.rank {
                Some(n) => n,
                None => block_depth(&phi, a.width)?,
            };
            let out = fo_to_foc(&phi, n, a.width)?;
            let m = metrics(&out);
            o.text(&print(&out))?;
            o.record(
                "foc",
                &[
                    ("formula", print(&out)),
                    ("br", m.br.to_string()),
                    ("bw", m.bw.to_string()),
                ],
            )?;
        }
        Command::RichWitness(a) => {
            let q = match a.q {
                Some(q) => q,
                None => smallest_q(a.j, a.s, a.b)?,
            };
            let w = large_gaps_witness(a.j, a.s, a.b, q)?;
            o.text(&w.report())?;
            let xs: Vec<String> = w.x.iter().map(i128::to_string).collect();
            o.record(
                "witness",
                &[
                    ("j", w.j.to_string()),
                    ("s", w.s.to_string()),
                    ("B", w.b.to_string()),
                    ("q", w.q.to_string()),
                    ("d", w.d.to_string()),
                    ("x", xs.join(",")),
                    ("checks", w.checks.len().to_string()),
                    ("verified", w.verified().to_string()),
                ],
            )?;
            if !w.verified() {
                return Ok(EXIT_CHECK_FAILED);
            }
        }
        Command::GapScan(a) => {
            if ctx.preds.arity(&a.predicate) != Some(1) {
                return Err(Error::invalid(format!(
                    "{} is not a known unary predicate",
                    a.predicate
                )));
            }
            let member = |v: u64| ctx.preds.holds(&a.predicate, &[BigInt::from(v)]);
            let found = find_gap(&member, a.window, a.k)?;
            let text = match found {
                Some(q) => format!("gap q={q} interval=[{}, {}]", q / a.k, q * a.k),
                None => format!("none within [0, {}]", a.window),
            };
            o.both(
                &text,
                "gap",
                &[
                    ("q", found.map_or("none".into(), |q| q.to_string())),
                    ("k", a.k.to_string()),
                ],
            )?;
        }
    }
    Ok(0)
}

fn arith(
    ctx: &Ctx,
    phi: &Expr,
    sig: &Signature,
    d: usize,
    rho: Option<&str>,
    o: &mut Out<'_>,
) -> Result<i32> {
    let rho = match rho {
        Some(id) => Some(ctx.store.resolver(sig).resolve(id)?),
        None => None,
    };
    let psi = emit_arithmetic_in(&ctx.store, phi, d, sig, &ctx.preds, rho.as_ref())?;
    o.text(&psi.text())?;
    o.record(
        "arith",
        &[
            ("r", psi.r.to_string()),
            ("d", psi.d.to_string()),
            ("variables", psi.catalog.len().to_string()),
            ("formula", psi.text()),
        ],
    )?;
    Ok(0)
}

fn dynamic(ctx: &Ctx, a: &DynArgs, input: &mut dyn BufRead, o: &mut Out<'_>) -> Result<i32> {
    let ftext = read(&a.f.formula)?;
    let mut sig = ctx.signature(&ftext)?;
    let mut facts = Vec::new();
    if let Some(path) = &a.db {
        let s = Structure::parse(&read(path)?, Some(&sig))?;
        sig = s.sig().as_ref().clone();
        for (r, tuples) in s.relations().iter().enumerate() {
            for t in tuples {
                facts.push((
                    sig.name(r).to_string(),
                    t.iter().map(|&e| e as u64).collect::<Vec<_>>(),
                ));
            }
        }
    }
    let phi = ctx.formula(&ftext, &sig)?;
    let mut qs = QueryState::preprocess_in(&ctx.store, &phi, a.degree, &sig, &ctx.preds, &facts)?;
    let mut line = String::new();
    let mut lineno = 0;
    loop {
        line.clear();
        if input.read_line(&mut line).map_err(io_err)? == 0 {
            break;
        }
        lineno += 1;
        let cmd = line.trim();
        if cmd.is_empty() || cmd.starts_with('#') {
            continue;
        }
        let reply = match cmd.split_whitespace().next() {
            Some("answer") => qs.answer().to_string(),
            Some("dump") => qs.dump(),
            _ => {
                let at_line = |e: Error| match e {
                    Error::Invalid(m) => Error::invalid(format!("line {lineno}: {m}")),
                    other => other,
                };
                let c = parse_command(cmd).map_err(at_line)?;
                match qs.apply(&c).map_err(at_line)? {
                    UpdateOutcome::Applied | UpdateOutcome::NoOp => "ok".to_string(),
                    UpdateOutcome::RejectedDegree => "rejected degree".to_string(),
                }
            }
        };
        if o.format == Format::Machine {
            for l in reply.lines() {
                o.record(
                    "reply",
                    &[("line", lineno.to_string()), ("text", l.to_string())],
                )?;
            }
        } else {
            o.line(&reply)?;
        }
    }
    Ok(0)
}
