//! Verification suites: JSON case lists run through the inequality lab and
//! the reduction property checks, with deterministic reports.

use serde::{Deserialize, Serialize};

use crate::descriptor::{point_vars, MeanDescriptor};
use crate::domain::{Injection, Point, SolverConfig};
use crate::error::{MeanError, Result};
use crate::expr::Expr;
use crate::lab::{
    check_hm, check_mn_convexity, check_reduced_convexity, compare_means, CompareCase,
    ConvexityCase, CounterexampleReport, HMCase, RealFn, Sides, REDUCED_TOL_FACTOR,
};
use crate::mean::MeanFn;
use crate::reduction::{
    check_prop_a, check_thm_rgd, CheckOptions, PropertyReport, INNER_TIGHTENING,
};
use crate::sampler::Sampler;

pub const SUITE_VERSION: u32 = 1;

/// Suites shipped with the library, by name.
pub const BUILTIN_SUITES: &[(&str, &str)] = &[
    ("jensen", include_str!("../suites/jensen.json")),
    ("comparisons", include_str!("../suites/comparisons.json")),
    ("hm", include_str!("../suites/hm.json")),
    (
        "counterexamples",
        include_str!("../suites/counterexamples.json"),
    ),
    ("prop-a", include_str!("../suites/prop-a.json")),
    ("thm-rgd", include_str!("../suites/thm-rgd.json")),
];

/// Looks up a shipped suite; a trailing `.json` is ignored.
pub fn builtin(name: &str) -> Option<Result<Suite>> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    BUILTIN_SUITES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| Suite::from_json(src))
}

fn default_tol() -> f64 {
    1e-9
}

fn default_trials() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    pub cases: Vec<Case>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expect {
    #[default]
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub name: String,
    #[serde(default)]
    pub expect: Expect,
    /// Overrides the suite's trial count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Overrides the suite's tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(flatten)]
    pub check: Check,
}

/// `f` of a Hölder–Minkowski case: `"sum"`, `"product"` or an expression
/// in `u1..ul` (`u` when `l = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum HmFunction {
    Sum,
    Product,
    Expr(Expr),
}

impl TryFrom<String> for HmFunction {
    type Error = crate::expr::ParseError;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        Ok(match s.trim() {
            "sum" => HmFunction::Sum,
            "product" => HmFunction::Product,
            _ => HmFunction::Expr(Expr::parse(&s)?),
        })
    }
}

impl From<HmFunction> for String {
    fn from(f: HmFunction) -> Self {
        match f {
            HmFunction::Sum => "sum".into(),
            HmFunction::Product => "product".into(),
            HmFunction::Expr(e) => e.into(),
        }
    }
}

impl HmFunction {
    pub fn build(&self, ell: usize) -> Result<RealFn> {
        Ok(match self {
            HmFunction::Sum => RealFn::sum(),
            HmFunction::Product => RealFn::product(),
            HmFunction::Expr(e) => bind_point_fn(e, ell)?,
        })
    }
}

fn bind_point_fn(e: &Expr, dim: usize) -> Result<RealFn> {
    let names = point_vars("u", dim);
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    RealFn::from_expr(e, &refs)
}

/// What a case checks. `chi` is one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Check {
    /// `f(M(x)) <= N(f(x))`; `f` is an expression in the coordinates of `M`'s points.
    Convexity {
        m: MeanDescriptor,
        n: MeanDescriptor,
        f: Expr,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chi: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sampler: Option<Sampler>,
    },
    /// `G(x) <= E(x)`.
    Compare {
        g: MeanDescriptor,
        e: MeanDescriptor,
        chi: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sampler: Option<Sampler>,
    },
    /// `M(f(x^1, ..., x^l)) <= f(N_1(x^1), ..., N_l(x^l))`.
    Hm {
        ns: Vec<MeanDescriptor>,
        m: MeanDescriptor,
        f: HmFunction,
        chi: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sampler: Option<Sampler>,
    },
    /// The reduction of a weighted arithmetic mean is the weighted mean
    /// of the selected weights.
    PropA {
        mean: MeanDescriptor,
        chi: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sampler: Option<Sampler>,
    },
    /// The reduction of a deviation mean is the deviation mean of the
    /// selected deviations.
    ThmRgd {
        mean: MeanDescriptor,
        chi: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sampler: Option<Sampler>,
    },
}

impl Check {
    pub fn type_name(&self) -> &'static str {
        match self {
            Check::Convexity { .. } => "convexity",
            Check::Compare { .. } => "compare",
            Check::Hm { .. } => "hm",
            Check::PropA { .. } => "prop-a",
            Check::ThmRgd { .. } => "thm-rgd",
        }
    }

    /// Whether the case pairs a full check with a reduced one.
    pub fn is_inequality(&self) -> bool {
        matches!(
            self,
            Check::Convexity { .. } | Check::Compare { .. } | Check::Hm { .. }
        )
    }
}

/// A case with its means constructed.
#[derive(Debug, Clone)]
pub enum LabCase {
    Convexity(ConvexityCase, Option<Injection>),
    Compare(CompareCase, Injection),
    Hm(HMCase),
    PropA(MeanDescriptor, Injection, Option<Sampler>),
    ThmRgd(MeanDescriptor, Injection, Option<Sampler>),
}

fn sampler_or_default(s: &Option<Sampler>, m: &MeanFn) -> Result<Sampler> {
    match s {
        Some(s) => Ok(s.clone()),
        None => Sampler::default_for(&m.domain(), m.dim()),
    }
}

fn injection(chi: &[usize], m: &MeanDescriptor) -> Result<Injection> {
    let n = m
        .arity()
        .ok_or_else(|| MeanError::arg("descriptor does not fix its arity"))?;
    Injection::new(n, chi)
}

/// Inner means are solved tighter than the reductions built on them.
pub fn inner_config(solver: &SolverConfig) -> SolverConfig {
    SolverConfig {
        abs_tol: solver.abs_tol * INNER_TIGHTENING,
        rel_tol: solver.rel_tol * INNER_TIGHTENING,
        ..solver.clone()
    }
}

impl Case {
    /// Constructs the means of this case.
    pub fn build(&self, seed: u64, solver: &SolverConfig) -> Result<LabCase> {
        let inner = inner_config(solver);
        Ok(match &self.check {
            Check::Convexity {
                m,
                n,
                f,
                chi,
                sampler,
            } => {
                let mm = m.build(&inner)?;
                let chi = chi.as_ref().map(|c| injection(c, m)).transpose()?;
                let case = ConvexityCase {
                    f: bind_point_fn(f, mm.dim())?,
                    sampler: sampler_or_default(sampler, &mm)?,
                    n: n.build(&inner)?,
                    m: mm,
                    seed,
                    solver: solver.clone(),
                };
                LabCase::Convexity(case, chi)
            }
            Check::Compare { g, e, chi, sampler } => {
                let gm = g.build(&inner)?;
                let case = CompareCase {
                    sampler: sampler_or_default(sampler, &gm)?,
                    g: gm,
                    e: e.build(&inner)?,
                    seed,
                    solver: solver.clone(),
                };
                LabCase::Compare(case, injection(chi, g)?)
            }
            Check::Hm {
                ns,
                m,
                f,
                chi,
                sampler,
            } => {
                let ns_built = ns
                    .iter()
                    .map(|d| d.build(&inner))
                    .collect::<Result<Vec<_>>>()?;
                let first = ns_built
                    .first()
                    .ok_or_else(|| MeanError::arg("need at least one mean N_j"))?;
                LabCase::Hm(HMCase {
                    sampler: sampler_or_default(sampler, first)?,
                    f: f.build(ns.len())?,
                    chi: injection(chi, m)?,
                    m: m.build(&inner)?,
                    ns: ns_built,
                    seed,
                    solver: solver.clone(),
                })
            }
            Check::PropA { mean, chi, sampler } => {
                mean.weight_fns()?;
                LabCase::PropA(mean.clone(), injection(chi, mean)?, sampler.clone())
            }
            Check::ThmRgd { mean, chi, sampler } => {
                mean.deviation_family()?;
                LabCase::ThmRgd(mean.clone(), injection(chi, mean)?, sampler.clone())
            }
        })
    }
}

/// Both sides of a case's inequality at `x`, freshly evaluated.
/// `reduced` selects the reduced inequality.
pub fn reevaluate(lab: &LabCase, x: &[Point], reduced: bool) -> Result<Sides> {
    match (lab, reduced) {
        (LabCase::Convexity(c, _), false) => c.sides(x),
        (LabCase::Convexity(c, Some(chi)), true) => c.reduced_sides(chi, x),
        (LabCase::Compare(c, _), false) => c.sides(x),
        (LabCase::Compare(c, chi), true) => c.reduced_sides(chi, x),
        (LabCase::Hm(c), false) => c.sides(x),
        (LabCase::Hm(c), true) => c.reduced_sides(x),
        _ => Err(MeanError::arg("case has no such inequality")),
    }
}

/// Overrides applied on top of a suite's own settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub expect: Expect,
    pub seed: u64,
    pub trials: usize,
    pub tol: f64,
    /// The outcome matches `expect`.
    pub ok: bool,
    pub full: Option<CounterexampleReport>,
    pub reduced: Option<CounterexampleReport>,
    pub property: Option<PropertyReport>,
    /// The full inequality held on every sample but its reduction failed,
    /// which the theory rules out.
    pub implication_violated: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cases: usize,
    pub ok: usize,
    pub failed: usize,
    /// Cases whose full check found a counterexample.
    pub counterexamples: usize,
    pub implication_violations: usize,
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub version: u32,
    pub seed: u64,
    pub trials: usize,
    pub tol: f64,
    pub reduced_tol_factor: f64,
    /// Uniqueness, continuity and domain hypotheses are checked by sampling only.
    pub hypotheses: String,
    pub cases: Vec<CaseReport>,
    pub summary: Summary,
}

impl SuiteReport {
    pub fn all_ok(&self) -> bool {
        self.summary.failed == 0
    }
}

impl Suite {
    pub fn from_json(src: &str) -> Result<Self> {
        let s: Suite =
            serde_json::from_str(src).map_err(|e| MeanError::Malformed(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SUITE_VERSION {
            return Err(MeanError::Malformed(format!(
                "unsupported suite version {} (expected {SUITE_VERSION})",
                self.version
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(MeanError::Malformed("tol must be positive".into()));
        }
        if self.trials == 0 {
            return Err(MeanError::Malformed("trials must be at least 1".into()));
        }
        for c in &self.cases {
            if c.trials == Some(0) || c.tol.is_some_and(|t| !(t > 0.0 && t.is_finite())) {
                return Err(MeanError::Malformed(format!(
                    "case {}: trials and tol must be positive",
                    c.name
                )));
            }
        }
        self.solver
            .validate()
            .map_err(|e| MeanError::Malformed(e.to_string()))
    }

    /// Runs every case; case `i` uses seed `seed + i`. Errors are recorded
    /// per case and never abort the run.
    pub fn run(&self, opts: &RunOptions) -> SuiteReport {
        let seed = opts.seed.unwrap_or(self.seed);
        let trials = opts.trials.unwrap_or(self.trials);
        let tol = opts.tol.unwrap_or(self.tol);
        let cases: Vec<CaseReport> = self
            .cases
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let t = if opts.trials.is_some() {
                    trials
                } else {
                    c.trials.unwrap_or(trials)
                };
                let tl = if opts.tol.is_some() {
                    tol
                } else {
                    c.tol.unwrap_or(tol)
                };
                run_case(c, seed.wrapping_add(i as u64), t, tl, &self.solver)
            })
            .collect();
        let mut summary = Summary {
            cases: cases.len(),
            ..Summary::default()
        };
        for c in &cases {
            if c.ok {
                summary.ok += 1;
            } else {
                summary.failed += 1;
            }
            summary.counterexamples += c.full.as_ref().is_some_and(|r| r.found) as usize;
            summary.implication_violations += c.implication_violated as usize;
            summary.errors += c.error.is_some() as usize;
        }
        SuiteReport {
            suite: self.name.clone(),
            version: SUITE_VERSION,
            seed,
            trials,
            tol,
            reduced_tol_factor: REDUCED_TOL_FACTOR,
            hypotheses: "sampled".into(),
            cases,
            summary,
        }
    }
}

/// Runs a bare list of cases as an anonymous suite.
pub fn fuzz_suite(cases: &[Case], seed: u64, trials: usize, tol: f64) -> SuiteReport {
    Suite {
        version: SUITE_VERSION,
        name: "fuzz".into(),
        description: None,
        tol,
        trials,
        seed,
        solver: SolverConfig::default(),
        cases: cases.to_vec(),
    }
    .run(&RunOptions::default())
}

fn run_case(c: &Case, seed: u64, trials: usize, tol: f64, solver: &SolverConfig) -> CaseReport {
    let mut rep = CaseReport {
        name: c.name.clone(),
        kind: c.check.type_name().into(),
        expect: c.expect,
        seed,
        trials,
        tol,
        ok: false,
        full: None,
        reduced: None,
        property: None,
        implication_violated: false,
        error: None,
    };
    if let Err(e) = fill(&mut rep, c, seed, trials, tol, solver) {
        rep.error = Some(e.to_string());
        return rep;
    }
    if let Some(e) = [&rep.full, &rep.reduced]
        .into_iter()
        .flatten()
        .find_map(|r| r.error.clone())
    {
        rep.error = Some(e);
    }
    let full_pass = rep.full.as_ref().is_some_and(|r| r.passed());
    rep.implication_violated = full_pass && rep.reduced.as_ref().is_some_and(|r| r.found);
    rep.ok = match (&rep.property, c.expect) {
        (Some(p), Expect::Pass) => p.passed,
        (Some(p), Expect::Fail) => !p.passed && p.errors.is_empty(),
        (None, Expect::Pass) => full_pass && rep.reduced.as_ref().is_none_or(|r| r.passed()),
        (None, Expect::Fail) => rep.full.as_ref().is_some_and(|r| r.found),
    };
    rep
}

fn fill(
    rep: &mut CaseReport,
    c: &Case,
    seed: u64,
    trials: usize,
    tol: f64,
    solver: &SolverConfig,
) -> Result<()> {
    let rtol = tol * REDUCED_TOL_FACTOR;
    match c.build(seed, solver)? {
        LabCase::Convexity(case, chi) => {
            rep.full = Some(check_mn_convexity(&case, trials, tol)?);
            if let Some(chi) = chi {
                rep.reduced = Some(check_reduced_convexity(&case, &chi, trials, rtol)?);
            }
        }
        LabCase::Compare(case, chi) => {
            let (f, r) = compare_means(&case, &chi, trials, tol)?;
            rep.full = Some(f);
            rep.reduced = Some(r);
        }
        LabCase::Hm(case) => {
            let (f, r) = check_hm(&case, trials, tol)?;
            rep.full = Some(f);
            rep.reduced = Some(r);
        }
        LabCase::PropA(mean, chi, sampler) => {
            let (ws, dim) = mean.weight_fns()?;
            let opts = CheckOptions {
                samples: trials,
                tol,
                seed,
                sampler,
                solver: solver.clone(),
            };
            rep.property = Some(check_prop_a(&ws, &chi, dim, &opts)?);
        }
        LabCase::ThmRgd(mean, chi, sampler) => {
            let opts = CheckOptions {
                samples: trials,
                tol,
                seed,
                sampler,
                solver: solver.clone(),
            };
            rep.property = Some(check_thm_rgd(&mean.deviation_family()?, &chi, &opts)?);
        }
    }
    Ok(())
}
