//! Randomized search for counterexamples to inequalities between means:
//! `(M, N)`-convexity `f(M(x)) <= N(f(x))`, comparison `G(x) <= E(x)`,
//! Hölder–Minkowski type inequalities `M(f(x^1, ..., x^l)) <= f(N_1(x^1), ..., N_l(x^l))`,
//! and the same inequalities for reductions along an injection.
//!
//! Sampling can only find counterexamples, never rule them out.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Injection, Point, SolverConfig};
use crate::error::{MeanError, Result};
use crate::expr::Expr;
use crate::mean::MeanFn;
use crate::reduction::{reduce, ReductionResult, Uniqueness};
use crate::sampler::Sampler;

/// The reduced half of a paired check runs at this multiple of `tol`.
pub const REDUCED_TOL_FACTOR: f64 = 10.0;

/// A real function of several reals: the `f` of a convexity or
/// Hölder–Minkowski case.
#[derive(Clone)]
pub struct RealFn {
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    label: String,
}

impl fmt::Debug for RealFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("RealFn").field(&self.label).finish()
    }
}

impl RealFn {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        RealFn {
            eval: Arc::new(f),
            label: label.into(),
        }
    }

    /// Binds `expr` to the variable names, in argument order.
    pub fn from_expr(expr: &Expr, names: &[&str]) -> Result<Self> {
        let c = expr.bind(names)?;
        Ok(RealFn::new(expr.source(), move |u| c.eval(u)))
    }

    pub fn sum() -> Self {
        RealFn::new("sum", |u| u.iter().sum())
    }

    pub fn product() -> Self {
        RealFn::new("product", |u| u.iter().product())
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        (self.eval)(u)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// `f(M(x)) <= N(f(x_1), ..., f(x_n))`.
#[derive(Debug, Clone)]
pub struct ConvexityCase {
    /// Domain side; scalar or vector.
    pub m: MeanFn,
    /// Range side; scalar.
    pub n: MeanFn,
    pub f: RealFn,
    pub sampler: Sampler,
    pub seed: u64,
    /// Used for reductions.
    pub solver: SolverConfig,
}

/// `G(x) <= E(x)` for scalar means of equal arity.
#[derive(Debug, Clone)]
pub struct CompareCase {
    pub g: MeanFn,
    pub e: MeanFn,
    pub sampler: Sampler,
    pub seed: u64,
    pub solver: SolverConfig,
}

/// `M(f(x^1, ..., x^l)) <= f(N_1(x^1), ..., N_l(x^l))`, `f` acting slotwise on the left.
#[derive(Debug, Clone)]
pub struct HMCase {
    pub ns: Vec<MeanFn>,
    pub m: MeanFn,
    pub f: RealFn,
    pub chi: Injection,
    /// One sampler for every `x^j`.
    pub sampler: Sampler,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl HMCase {
    pub fn ell(&self) -> usize {
        self.ns.len()
    }
}

/// Outcome of one randomized search. When `found` is false, the witness
/// and values describe the trial that came closest to a violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub case: String,
    pub trials: usize,
    pub found: bool,
    pub witness: Option<Vec<Point>>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    /// `lhs - rhs`.
    pub gap: Option<f64>,
    /// Trials where a reduction was not flagged unique or looked
    /// discontinuous. Uniqueness and continuity are only sampled.
    pub hypothesis_suspects: usize,
    pub error: Option<String>,
}

impl CounterexampleReport {
    /// No counterexample and no error.
    pub fn passed(&self) -> bool {
        !self.found && self.error.is_none()
    }
}

/// The violation test, scaled to stay unit-free.
pub fn violates(lhs: f64, rhs: f64, tol: f64) -> bool {
    lhs > rhs + tol * (1.0 + lhs.abs() + rhs.abs())
}

fn scaled_gap(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs) / (1.0 + lhs.abs() + rhs.abs())
}

/// One evaluation of both sides of an inequality.
#[derive(Debug, Clone, Copy)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
    pub suspect: bool,
}

impl Sides {
    fn exact(lhs: f64, rhs: f64) -> Self {
        Sides {
            lhs,
            rhs,
            suspect: false,
        }
    }
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const FULL_STREAM: u64 = 0;
const REDUCED_STREAM: u64 = 1;

/// Runs `trials` draws and stops at the first verified violation or error.
/// A violation counts only if a second, fresh evaluation repeats it.
fn search(
    case: &str,
    trials: usize,
    tol: f64,
    mut rng: ChaCha8Rng,
    draw: &mut dyn FnMut(&mut ChaCha8Rng) -> Vec<Point>,
    eval: &dyn Fn(&[Point]) -> Result<Sides>,
) -> CounterexampleReport {
    let mut rep = CounterexampleReport {
        case: case.to_string(),
        trials,
        found: false,
        witness: None,
        lhs: None,
        rhs: None,
        gap: None,
        hypothesis_suspects: 0,
        error: None,
    };
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let x = draw(&mut rng);
        let s = eval(&x).and_then(|s| {
            if s.lhs.is_finite() && s.rhs.is_finite() {
                Ok(s)
            } else {
                Err(MeanError::Domain(format!(
                    "non-finite sides lhs = {}, rhs = {}",
                    s.lhs, s.rhs
                )))
            }
        });
        let s = match s {
            Ok(s) => s,
            Err(e) => {
                rep.error = Some(e.to_string());
                rep.witness = Some(x);
                rep.lhs = None;
                rep.rhs = None;
                rep.gap = None;
                return rep;
            }
        };
        rep.hypothesis_suspects += s.suspect as usize;
        let confirmed =
            violates(s.lhs, s.rhs, tol) && eval(&x).is_ok_and(|t| violates(t.lhs, t.rhs, tol));
        let g = scaled_gap(s.lhs, s.rhs);
        if confirmed || g > worst {
            worst = g;
            rep.witness = Some(x);
            rep.lhs = Some(s.lhs);
            rep.rhs = Some(s.rhs);
            rep.gap = Some(s.lhs - s.rhs);
        }
        if confirmed {
            rep.found = true;
            return rep;
        }
    }
    rep
}

fn scalar_points(v: Vec<f64>) -> Result<Vec<Point>> {
    v.into_iter().map(Point::scalar).collect()
}

fn value(r: ReductionResult) -> Result<(Point, bool)> {
    let r = r.into_result()?;
    let suspect = r.unique_flag != Uniqueness::Unique || r.continuity_suspect;
    Ok((r.reduced_value, suspect))
}

fn same_arity(a: &MeanFn, b: &MeanFn) -> Result<()> {
    if a.arity() != b.arity() {
        return Err(MeanError::arg(format!(
            "means take {} and {} arguments",
            a.arity(),
            b.arity()
        )));
    }
    Ok(())
}

fn need_scalar(m: &MeanFn, what: &str) -> Result<()> {
    if !m.is_scalar() {
        return Err(MeanError::arg(format!("{what} must be a scalar mean")));
    }
    Ok(())
}

fn check_sampler(s: &Sampler, m: &MeanFn) -> Result<Sampler> {
    let mut s = s.clone();
    s.dim = m.dim();
    s.validate()?;
    s.check_within(&m.domain())?;
    Ok(s)
}

fn check_chi(chi: &Injection, n: usize) -> Result<()> {
    if chi.n() != n {
        return Err(MeanError::arg(format!(
            "injection maps into {} slots but the means take {n}",
            chi.n()
        )));
    }
    Ok(())
}

fn image(f: &RealFn, x: &[Point], range: &MeanFn) -> Result<Vec<Point>> {
    let y: Vec<f64> = x.iter().map(|p| f.eval(p.coords())).collect();
    if let Some(t) = y.iter().find(|t| !range.domain().contains(**t)) {
        return Err(MeanError::Domain(format!(
            "f = {} takes the value {t} outside {}",
            f.label(),
            range.domain()
        )));
    }
    scalar_points(y)
}

impl ConvexityCase {
    fn check(&self) -> Result<Sampler> {
        same_arity(&self.m, &self.n)?;
        need_scalar(&self.n, "N")?;
        check_sampler(&self.sampler, &self.m)
    }

    /// Both sides of the `n`-variable inequality at `x`.
    pub fn sides(&self, x: &[Point]) -> Result<Sides> {
        let lhs = self.f.eval(self.m.eval(x)?.coords());
        let rhs = self.n.eval(&image(&self.f, x, &self.n)?)?.first();
        Ok(Sides::exact(lhs, rhs))
    }

    /// Both sides of the reduced inequality `f(K(x)) <= N_chi(f(x))` at `x`.
    pub fn reduced_sides(&self, chi: &Injection, x: &[Point]) -> Result<Sides> {
        let (k, s1) = value(reduce(&self.m, chi, x, &self.solver)?)?;
        let (r, s2) = value(reduce(
            &self.n,
            chi,
            &image(&self.f, x, &self.n)?,
            &self.solver,
        )?)?;
        Ok(Sides {
            lhs: self.f.eval(k.coords()),
            rhs: r.first(),
            suspect: s1 || s2,
        })
    }
}

/// Searches for `x` with `f(M(x)) > N(f(x)) + tol (1 + |lhs| + |rhs|)`.
pub fn check_mn_convexity(
    case: &ConvexityCase,
    trials: usize,
    tol: f64,
) -> Result<CounterexampleReport> {
    let s = case.check()?;
    let n = case.m.arity();
    Ok(search(
        &format!("convexity f = {}, n = {n}", case.f.label()),
        trials,
        tol,
        rng_for(case.seed, FULL_STREAM),
        &mut |rng| s.sample_tuple(rng, n),
        &|x| case.sides(x),
    ))
}

/// The same search for `K = M_chi` and `N_chi`, over `k`-tuples.
pub fn check_reduced_convexity(
    case: &ConvexityCase,
    chi: &Injection,
    trials: usize,
    tol: f64,
) -> Result<CounterexampleReport> {
    let s = case.check()?;
    check_chi(chi, case.m.arity())?;
    let k = chi.k();
    Ok(search(
        &format!("reduced convexity f = {}, k = {k}", case.f.label()),
        trials,
        tol,
        rng_for(case.seed, REDUCED_STREAM),
        &mut |rng| s.sample_tuple(rng, k),
        &|x| case.reduced_sides(chi, x),
    ))
}

impl CompareCase {
    fn check(&self) -> Result<Sampler> {
        same_arity(&self.g, &self.e)?;
        need_scalar(&self.g, "G")?;
        need_scalar(&self.e, "E")?;
        let s = check_sampler(&self.sampler, &self.g)?;
        s.check_within(&self.e.domain())?;
        Ok(s)
    }

    pub fn sides(&self, x: &[Point]) -> Result<Sides> {
        Ok(Sides::exact(
            self.g.eval(x)?.first(),
            self.e.eval(x)?.first(),
        ))
    }

    pub fn reduced_sides(&self, chi: &Injection, x: &[Point]) -> Result<Sides> {
        let (g, s1) = value(reduce(&self.g, chi, x, &self.solver)?)?;
        let (e, s2) = value(reduce(&self.e, chi, x, &self.solver)?)?;
        Ok(Sides {
            lhs: g.first(),
            rhs: e.first(),
            suspect: s1 || s2,
        })
    }
}

/// `G <= E` over `n`-tuples at `tol`, then `G_chi <= E_chi` over `k`-tuples
/// at `REDUCED_TOL_FACTOR * tol`.
pub fn compare_means(
    case: &CompareCase,
    chi: &Injection,
    trials: usize,
    tol: f64,
) -> Result<(CounterexampleReport, CounterexampleReport)> {
    let s = case.check()?;
    check_chi(chi, case.g.arity())?;
    let (n, k) = (chi.n(), chi.k());
    let full = search(
        &format!("compare {} <= {}", case.g.label(), case.e.label()),
        trials,
        tol,
        rng_for(case.seed, FULL_STREAM),
        &mut |rng| s.sample_tuple(rng, n),
        &|x| case.sides(x),
    );
    let reduced = search(
        &format!("reduced compare, k = {k}"),
        trials,
        tol * REDUCED_TOL_FACTOR,
        rng_for(case.seed, REDUCED_STREAM),
        &mut |rng| s.sample_tuple(rng, k),
        &|x| case.reduced_sides(chi, x),
    );
    Ok((full, reduced))
}

impl HMCase {
    fn check(&self) -> Result<Sampler> {
        if self.ns.is_empty() {
            return Err(MeanError::arg("need at least one mean N_j"));
        }
        need_scalar(&self.m, "M")?;
        for nj in &self.ns {
            same_arity(nj, &self.m)?;
            need_scalar(nj, "N_j")?;
        }
        check_chi(&self.chi, self.m.arity())?;
        let mut s = self.sampler.clone();
        s.dim = 1;
        s.validate()?;
        for nj in &self.ns {
            s.check_within(&nj.domain())?;
        }
        Ok(s)
    }

    /// Splits a concatenated witness `x^1 ++ ... ++ x^l`.
    fn split<'a>(&self, x: &'a [Point]) -> Result<Vec<&'a [Point]>> {
        let l = self.ell();
        if x.len() % l != 0 {
            return Err(MeanError::arg(format!(
                "{} entries do not split into {l} tuples",
                x.len()
            )));
        }
        Ok(x.chunks(x.len() / l).collect())
    }

    fn slotwise(&self, parts: &[&[Point]]) -> Result<Vec<Point>> {
        let len = parts[0].len();
        let z: Vec<f64> = (0..len)
            .map(|i| {
                let args: Vec<f64> = parts.iter().map(|p| p[i].first()).collect();
                self.f.eval(&args)
            })
            .collect();
        if let Some(t) = z.iter().find(|t| !self.m.domain().contains(**t)) {
            return Err(MeanError::Domain(format!(
                "f = {} takes the value {t} outside {}",
                self.f.label(),
                self.m.domain()
            )));
        }
        scalar_points(z)
    }

    /// Both sides of the `n l`-variable inequality at `x^1 ++ ... ++ x^l`.
    pub fn sides(&self, x: &[Point]) -> Result<Sides> {
        let parts = self.split(x)?;
        let lhs = self.m.eval(&self.slotwise(&parts)?)?.first();
        let vals = self
            .ns
            .iter()
            .zip(&parts)
            .map(|(nj, xj)| Ok(nj.eval(xj)?.first()))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Sides::exact(lhs, self.f.eval(&vals)))
    }

    /// Both sides of the `k l`-variable reduced inequality.
    pub fn reduced_sides(&self, x: &[Point]) -> Result<Sides> {
        let parts = self.split(x)?;
        let (lhs, mut suspect) = value(reduce(
            &self.m,
            &self.chi,
            &self.slotwise(&parts)?,
            &self.solver,
        )?)?;
        let mut vals = Vec::with_capacity(parts.len());
        for (nj, xj) in self.ns.iter().zip(&parts) {
            let (v, s) = value(reduce(nj, &self.chi, xj, &self.solver)?)?;
            suspect |= s;
            vals.push(v.first());
        }
        Ok(Sides {
            lhs: lhs.first(),
            rhs: self.f.eval(&vals),
            suspect,
        })
    }
}

/// The `n l`-variable inequality at `tol`, then its reduction over `k l`
/// variables at `REDUCED_TOL_FACTOR * tol`. Witnesses are the concatenation
/// `x^1 ++ ... ++ x^l`.
pub fn check_hm(
    case: &HMCase,
    trials: usize,
    tol: f64,
) -> Result<(CounterexampleReport, CounterexampleReport)> {
    let s = case.check()?;
    let (n, k, l) = (case.chi.n(), case.chi.k(), case.ell());
    let full = search(
        &format!("hm f = {}, l = {l}, n = {n}", case.f.label()),
        trials,
        tol,
        rng_for(case.seed, FULL_STREAM),
        &mut |rng| s.sample_tuple(rng, n * l),
        &|x| case.sides(x),
    );
    let reduced = search(
        &format!("reduced hm, k = {k}"),
        trials,
        tol * REDUCED_TOL_FACTOR,
        rng_for(case.seed, REDUCED_STREAM),
        &mut |rng| s.sample_tuple(rng, k * l),
        &|x| case.reduced_sides(x),
    );
    Ok((full, reduced))
}
