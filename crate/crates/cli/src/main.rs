//! `meanred`: compute means and reductions, and run verification suites.
//!
//! Exit codes: 0 success, 1 a verification failed, 2 invalid input,
//! 3 a solver did not converge.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use meanred::descriptor::{GeneratorSpec, MeanDescriptor};
use meanred::expr::Expr;
use meanred::reduction::reduce;
use meanred::suite::{builtin, RunOptions, Suite, SuiteReport, BUILTIN_SUITES};
use meanred::textio::{parse_injection, parse_points};
use meanred::{Interval, MeanError, Point, SolverConfig};

#[derive(Parser)]
#[command(name = "meanred", version, about = "Deviation means, reductions and reducible inequalities")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct RunArgs {
    /// Base seed; case i of a suite uses seed + i.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials per case.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    trials: Option<u64>,
    /// Violation tolerance for suites; absolute solver tolerance for mean and reduce.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a mean at a tuple.
    Mean {
        #[command(flatten)]
        mean: MeanArgs,
        /// The tuple: `1,7`, or points `1,2;3,4`.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
    },
    /// Evaluate the reduction of a mean along an injection.
    Reduce {
        #[command(flatten)]
        mean: MeanArgs,
        /// One-based injection, e.g. `1,2`.
        #[arg(long)]
        chi: String,
        /// The k-tuple.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
    },
    /// Run a suite file, or a built-in suite by name.
    Verify { suite: String },
    /// Run several suites (all built-ins by default) and aggregate.
    Fuzz { suites: Vec<String> },
}

#[derive(Args)]
struct MeanArgs {
    /// Mean family, e.g. holder, gini, quasi-arithmetic.
    #[arg(long, conflicts_with = "descriptor")]
    kind: Option<String>,
    /// A descriptor as JSON, or `@path` to read one.
    #[arg(long)]
    descriptor: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q: Option<f64>,
    /// Generator: id, log, exp, a power exponent, or JSON. Repeat for matkowski.
    #[arg(long, allow_hyphen_values = true)]
    f: Vec<String>,
    /// Weight expression. Repeat for one per slot.
    #[arg(long, allow_hyphen_values = true)]
    w: Vec<String>,
    /// Deviation or potential expression; `;` separates covector components.
    #[arg(long, allow_hyphen_values = true)]
    e: Vec<String>,
    /// Gradient of a custom potential, components separated by `;`.
    #[arg(long, allow_hyphen_values = true)]
    grad: Vec<String>,
    #[arg(long)]
    arity: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Open interval `lo,hi`; `inf` and `-inf` allowed.
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
}

/// An error with its exit code.
struct Fail {
    code: u8,
    msg: String,
}

impl From<MeanError> for Fail {
    fn from(e: MeanError) -> Self {
        Fail {
            code: if e.is_no_convergence() { 3 } else { 2 },
            msg: e.to_string(),
        }
    }
}

fn input(msg: impl Into<String>) -> Fail {
    Fail {
        code: 2,
        msg: msg.into(),
    }
}

fn exprs(v: &[String]) -> Result<Vec<Expr>, Fail> {
    v.iter()
        .map(|s| Expr::parse(s).map_err(|e| input(format!("expression '{s}': {e}"))))
        .collect()
}

fn components(v: &[String]) -> Result<Vec<Vec<Expr>>, Fail> {
    v.iter()
        .map(|s| exprs(&s.split(';').map(str::to_string).collect::<Vec<_>>()))
        .collect()
}

fn generator(s: &str) -> Result<GeneratorSpec, Fail> {
    let s = s.trim();
    if s.starts_with('{') {
        return serde_json::from_str(s).map_err(|e| input(format!("generator: {e}")));
    }
    Ok(match s.parse::<f64>() {
        Ok(p) => GeneratorSpec::Power { power: p },
        Err(_) => GeneratorSpec::Named(s.to_string()),
    })
}

fn domain(s: &Option<String>) -> Result<Option<Interval>, Fail> {
    let Some(s) = s else { return Ok(None) };
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [lo, hi] = parts[..] else {
        return Err(input("domain must be 'lo,hi'"));
    };
    let num = |t: &str| {
        t.parse::<f64>()
            .map_err(|_| input(format!("domain endpoint '{t}' is not a number")))
    };
    Ok(Some(Interval::open(num(lo)?, num(hi)?)?))
}

fn need<T: Clone>(v: Option<T>, flag: &str, kind: &str) -> Result<T, Fail> {
    v.ok_or_else(|| input(format!("--{flag} is required for {kind}")))
}

impl MeanArgs {
    /// `n` and `d` are the fallbacks read off the input tuple.
    fn descriptor(&self, n: usize, d: usize) -> Result<MeanDescriptor, Fail> {
        if let Some(src) = &self.descriptor {
            let text = match src.strip_prefix('@') {
                Some(path) => fs::read_to_string(path)
                    .map_err(|e| input(format!("cannot read {path}: {e}")))?,
                None => src.clone(),
            };
            let d: MeanDescriptor =
                serde_json::from_str(&text).map_err(|e| input(format!("descriptor: {e}")))?;
            return Ok(match (d.arity(), self.arity) {
                (_, Some(a)) => d.with_arity(a),
                (None, None) => d.with_arity(n),
                _ => d,
            });
        }
        let kind = self
            .kind
            .as_deref()
            .ok_or_else(|| input("give --kind or --descriptor"))?;
        let arity = self.arity.unwrap_or(n);
        let dim = self.dim.unwrap_or(d);
        let dom = domain(&self.domain)?;
        let one_gen = || -> Result<GeneratorSpec, Fail> {
            match &self.f[..] {
                [g] => generator(g),
                _ => Err(input(format!("{kind} takes exactly one --f"))),
            }
        };
        let ws = || -> Result<Vec<Expr>, Fail> {
            if self.w.is_empty() {
                Err(input(format!("--w is required for {kind}")))
            } else {
                exprs(&self.w)
            }
        };
        Ok(match kind {
            "arithmetic" => MeanDescriptor::Arithmetic { arity, dim },
            "weighted-arithmetic" => MeanDescriptor::WeightedArithmetic {
                weights: ws()?,
                arity: Some(arity),
                dim,
                domain: dom,
            },
            "holder" => MeanDescriptor::Holder {
                p: need(self.p, "p", kind)?,
                arity,
            },
            "gini" => MeanDescriptor::Gini {
                p: need(self.p, "p", kind)?,
                q: need(self.q, "q", kind)?,
                arity,
            },
            "quasi-arithmetic" => MeanDescriptor::QuasiArithmetic {
                f: one_gen()?,
                arity,
            },
            "bajraktarevic" => MeanDescriptor::Bajraktarevic {
                f: one_gen()?,
                weights: ws()?,
                arity: Some(arity),
                domain: dom,
            },
            "matkowski" => MeanDescriptor::Matkowski {
                fs: self.f.iter().map(|g| generator(g)).collect::<Result<_, _>>()?,
                arity: Some(arity),
            },
            "deviation-custom" => MeanDescriptor::DeviationCustom {
                e: exprs(&self.e)?,
                arity: Some(arity),
                domain: dom,
            },
            "gen-deviation" => MeanDescriptor::GenDeviation {
                e: components(&self.e)?,
                dim,
                arity: Some(arity),
                domain: dom,
            },
            "norm-squared-potential" => MeanDescriptor::NormSquaredPotential {
                weights: ws()?,
                dim,
                arity: Some(arity),
                domain: dom,
            },
            "custom-potential" => MeanDescriptor::CustomPotential {
                f: exprs(&self.e)?,
                grad: (!self.grad.is_empty())
                    .then(|| components(&self.grad))
                    .transpose()?,
                dim,
                arity: Some(arity),
                domain: dom,
            },
            other => return Err(input(format!("unknown kind '{other}'"))),
        })
    }
}

fn solver(run: &RunArgs) -> Result<SolverConfig, Fail> {
    let mut cfg = SolverConfig::default();
    if let Some(t) = run.tol {
        cfg.abs_tol = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn coords(p: &Point) -> Value {
    if p.dim() == 1 {
        json!(p.first())
    } else {
        json!(p.coords())
    }
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String, Fail> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| input(e.to_string());
    w.write_record(header).map_err(io_err)?;
    for r in rows {
        w.write_record(r).map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| input(e.to_string()))
}

fn value_columns(p: &Point) -> (Vec<String>, Vec<String>) {
    let head = (1..=p.dim()).map(|k| format!("v{k}")).collect();
    let vals = p.coords().iter().map(|c| format!("{c:?}")).collect();
    (head, vals)
}

fn emit(run: &RunArgs, text: String) -> Result<(), Fail> {
    match &run.output {
        Some(path) => fs::write(path, text)
            .map_err(|e| input(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| input(e.to_string()))
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn cmd_mean(run: &RunArgs, m: &MeanArgs, x: &str) -> Result<u8, Fail> {
    let x = parse_points(x)?;
    let desc = m.descriptor(x.len(), x[0].dim())?;
    let cfg = solver(run)?;
    let mean = desc.build(&cfg)?;
    let rep = mean.eval_report(&x)?.into_result()?;
    let text = match run.format {
        Format::Json => pretty(&json!({
            "descriptor": desc,
            "x": x,
            "value": coords(&rep.value),
            "residual": rep.residual,
            "iterations": rep.iterations,
            "converged": rep.converged,
        })),
        Format::Csv => {
            let (mut head, mut row) = value_columns(&rep.value);
            head.extend(["residual", "iterations", "converged"].map(String::from));
            row.extend([
                format!("{:?}", rep.residual),
                rep.iterations.to_string(),
                rep.converged.to_string(),
            ]);
            csv_text(&head, &[row])?
        }
    };
    emit(run, text)?;
    Ok(0)
}

fn cmd_reduce(run: &RunArgs, m: &MeanArgs, chi: &str, x: &str) -> Result<u8, Fail> {
    let x = parse_points(x)?;
    let n = match (m.arity, &m.descriptor) {
        (Some(n), _) => n,
        (None, Some(_)) => m.descriptor(0, x[0].dim())?.arity().unwrap_or(0),
        (None, None) => 0,
    };
    if n == 0 {
        return Err(input("give --arity (the number of arguments of the full mean)"));
    }
    let desc = m.descriptor(n, x[0].dim())?;
    let chi = parse_injection(chi, n)?;
    let cfg = solver(run)?;
    let mean = desc.build(&cfg)?;
    let r = reduce(&mean, &chi, &x, &cfg)?;
    let text = match run.format {
        Format::Json => pretty(&json!({
            "descriptor": desc,
            "chi": chi.one_based(),
            "x": x,
            "reduced_value": coords(&r.reduced_value),
            "fixed_point_residual": r.fixed_point_residual,
            "unique_flag": r.unique_flag,
            "continuity_suspect": r.continuity_suspect,
            "converged": r.converged(),
            "iterations": r.certificate.iterations,
        })),
        Format::Csv => {
            let (mut head, mut row) = value_columns(&r.reduced_value);
            head.extend(
                [
                    "fixed_point_residual",
                    "unique_flag",
                    "continuity_suspect",
                    "converged",
                ]
                .map(String::from),
            );
            row.extend([
                format!("{:?}", r.fixed_point_residual),
                serde_json::to_value(r.unique_flag)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default(),
                r.continuity_suspect.to_string(),
                r.converged().to_string(),
            ]);
            csv_text(&head, &[row])?
        }
    };
    emit(run, text)?;
    if r.converged() {
        Ok(0)
    } else {
        eprintln!(
            "error: reduction did not converge (residual {:e})",
            r.fixed_point_residual
        );
        Ok(3)
    }
}

fn load_suite(name: &str) -> Result<Suite, Fail> {
    let path = std::path::Path::new(name);
    if path.is_file() {
        let text = fs::read_to_string(path)
            .map_err(|e| input(format!("cannot read {name}: {e}")))?;
        return Ok(Suite::from_json(&text)?);
    }
    let bare = name.strip_prefix("builtin:").unwrap_or(name);
    match builtin(bare) {
        Some(s) => Ok(s?),
        None => Err(input(format!(
            "no suite file '{name}' and no built-in of that name (built-ins: {})",
            BUILTIN_SUITES
                .iter()
                .map(|(n, _)| *n)
                .collect::<Vec<_>>()
                .join(", ")
        ))),
    }
}

fn run_options(run: &RunArgs) -> RunOptions {
    RunOptions {
        seed: run.seed,
        trials: run.trials.map(|t| t as usize),
        tol: run.tol,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|t| format!("{t:?}")).unwrap_or_default()
}

fn case_rows(rep: &SuiteReport) -> Vec<Vec<String>> {
    rep.cases
        .iter()
        .map(|c| {
            let full = c.full.as_ref();
            let red = c.reduced.as_ref();
            vec![
                rep.suite.clone(),
                c.name.clone(),
                c.kind.clone(),
                format!("{:?}", c.expect).to_lowercase(),
                c.ok.to_string(),
                c.seed.to_string(),
                full.map(|f| f.found.to_string())
                    .or(c.property.as_ref().map(|p| (!p.passed).to_string()))
                    .unwrap_or_default(),
                opt(full.and_then(|f| f.lhs)),
                opt(full.and_then(|f| f.rhs)),
                opt(full.and_then(|f| f.gap).or(c.property.as_ref().map(|p| p.max_deviation))),
                red.map(|r| r.found.to_string()).unwrap_or_default(),
                opt(red.and_then(|r| r.gap)),
                c.implication_violated.to_string(),
                c.error.clone().unwrap_or_default(),
            ]
        })
        .collect()
}

const CASE_HEADER: [&str; 14] = [
    "suite",
    "case",
    "type",
    "expect",
    "ok",
    "seed",
    "found",
    "lhs",
    "rhs",
    "gap",
    "reduced_found",
    "reduced_gap",
    "implication_violated",
    "error",
];

fn report_suites(run: &RunArgs, reps: &[SuiteReport], aggregate: bool) -> Result<u8, Fail> {
    for r in reps {
        eprintln!(
            "{}: {} cases, {} ok, {} failed, {} counterexamples, {} implication violations",
            r.suite,
            r.summary.cases,
            r.summary.ok,
            r.summary.failed,
            r.summary.counterexamples,
            r.summary.implication_violations
        );
    }
    let text = match run.format {
        Format::Json if aggregate => {
            let total = |f: fn(&SuiteReport) -> usize| reps.iter().map(f).sum::<usize>();
            pretty(&json!({
                "reports": reps,
                "summary": {
                    "suites": reps.len(),
                    "cases": total(|r| r.summary.cases),
                    "ok": total(|r| r.summary.ok),
                    "failed": total(|r| r.summary.failed),
                    "counterexamples": total(|r| r.summary.counterexamples),
                    "implication_violations": total(|r| r.summary.implication_violations),
                },
            }))
        }
        Format::Json => pretty(&json!(reps[0])),
        Format::Csv => {
            let rows: Vec<Vec<String>> = reps.iter().flat_map(case_rows).collect();
            csv_text(&CASE_HEADER.map(String::from), &rows)?
        }
    };
    emit(run, text)?;
    let ok = reps
        .iter()
        .all(|r| r.all_ok() && r.summary.implication_violations == 0);
    Ok(if ok { 0 } else { 1 })
}

fn cmd_verify(run: &RunArgs, name: &str) -> Result<u8, Fail> {
    let suite = load_suite(name)?;
    let rep = suite.run(&run_options(run));
    report_suites(run, &[rep], false)
}

fn cmd_fuzz(run: &RunArgs, names: &[String]) -> Result<u8, Fail> {
    let names: Vec<String> = if names.is_empty() {
        BUILTIN_SUITES.iter().map(|(n, _)| n.to_string()).collect()
    } else {
        names.to_vec()
    };
    let suites = names
        .iter()
        .map(|n| load_suite(n))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = run_options(run);
    let reps: Vec<SuiteReport> = suites.iter().map(|s| s.run(&opts)).collect();
    report_suites(run, &reps, true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Cmd::Mean { mean, x } => cmd_mean(&cli.run, mean, x),
        Cmd::Reduce { mean, chi, x } => cmd_reduce(&cli.run, mean, chi, x),
        Cmd::Verify { suite } => cmd_verify(&cli.run, suite),
        Cmd::Fuzz { suites } => cmd_fuzz(&cli.run, suites),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
