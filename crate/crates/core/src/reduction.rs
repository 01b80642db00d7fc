//! Reductions of means along injections: the `k`-variable mean `K` with
//! `M((x|chi)(K(x))) = K(x)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{
    hull_combination, min_max, select, splice, Barycentric, Injection, Point, SolverConfig,
    SolverReport,
};
use crate::error::{MeanError, Result};
use crate::mean::{check_in_hull, MeanFn};
use crate::sampler::Sampler;
use crate::scalar::{DeviationTuple, WeightFn};
use crate::vector::GenDeviation;

/// Whether the computed fixed point is believed to be the only one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Uniqueness {
    Unique,
    MultipleSuspected,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionResult {
    pub reduced_value: Point,
    /// `|M((x|chi)(y)) - y|` at the returned `y`.
    pub fixed_point_residual: f64,
    pub certificate: SolverReport<Point>,
    pub unique_flag: Uniqueness,
    /// A jump of `y -> M((x|chi)(y))` was seen while sampling. Continuity
    /// is only ever sampled, never proven.
    pub continuity_suspect: bool,
}

impl ReductionResult {
    pub fn converged(&self) -> bool {
        self.certificate.converged
    }

    /// Turns an unconverged result into [`MeanError::NoConvergence`].
    pub fn into_result(self) -> Result<Self> {
        if self.converged() {
            Ok(self)
        } else {
            Err(MeanError::NoConvergence {
                iterations: self.certificate.iterations,
                residual: self.fixed_point_residual,
            })
        }
    }
}

fn check_chi(m: &MeanFn, chi: &Injection, k: usize) -> Result<()> {
    if chi.n() != m.arity() {
        return Err(MeanError::arg(format!(
            "injection maps into {} slots but the mean takes {}",
            chi.n(),
            m.arity()
        )));
    }
    if chi.k() != k {
        return Err(MeanError::arg(format!(
            "injection has k = {}, tuple has {k} entries",
            chi.k()
        )));
    }
    Ok(())
}

/// `m_{x,M}(y) = M((x|chi)(y))` for `y` in `conv(x)`.
pub fn spliced_eval(m: &MeanFn, chi: &Injection, x: &[Point], y: &Point) -> Result<Point> {
    check_chi(m, chi, x.len())?;
    check_in_hull(x, y)?;
    m.eval(&splice(x, chi, y)?)
}

fn spread(x: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in x.iter().enumerate() {
        for b in &x[i + 1..] {
            d = d.max(a.dist(b));
        }
    }
    d
}

/// Residual tolerance of the fixed-point certificate: `abs_tol (1 + spread(x))`.
pub fn fixed_point_tol(cfg: &SolverConfig, x: &[Point]) -> f64 {
    cfg.abs_tol * (1.0 + spread(x))
}

/// Reduces a mean of any kind: bisection for scalar means, damped
/// fixed-point iteration otherwise.
pub fn reduce(
    m: &MeanFn,
    chi: &Injection,
    x: &[Point],
    cfg: &SolverConfig,
) -> Result<ReductionResult> {
    if m.is_scalar() {
        let xs: Vec<f64> = x.iter().map(Point::first).collect();
        if x.iter().any(|p| p.dim() != 1) {
            return Err(MeanError::arg("scalar mean needs one-dimensional points"));
        }
        reduce_scalar(m, chi, &xs, cfg)
    } else {
        reduce_vector(m, chi, x, cfg)
    }
}

const GRID: usize = 32;

/// Bisection on `mu(y) = M((x|chi)(y)) - y` over `[min x, max x]`, where
/// the mean property gives `mu(min x) >= 0 >= mu(max x)`.
pub fn reduce_scalar(
    m: &MeanFn,
    chi: &Injection,
    x: &[f64],
    cfg: &SolverConfig,
) -> Result<ReductionResult> {
    cfg.validate()?;
    if !m.is_scalar() {
        return Err(MeanError::arg("reduce_scalar needs a scalar mean"));
    }
    check_chi(m, chi, x.len())?;
    let pts: Vec<Point> = x.iter().map(|&t| Point::scalar(t)).collect::<Result<_>>()?;
    if let Some(t) = x.iter().find(|t| !m.domain().contains(**t)) {
        return Err(MeanError::arg(format!(
            "argument {t} outside {}",
            m.domain()
        )));
    }
    let (lo, hi) = min_max(x).ok_or_else(|| MeanError::arg("empty tuple"))?;
    let s = hi - lo;
    let done = |y: f64,
                residual: f64,
                iterations: usize,
                converged: bool,
                unique: Uniqueness,
                jump: bool| {
        let p = Point::scalar(y).expect("finite");
        ReductionResult {
            reduced_value: p.clone(),
            fixed_point_residual: residual,
            certificate: SolverReport {
                value: p,
                residual,
                iterations,
                converged,
                trace: None,
            },
            unique_flag: unique,
            continuity_suspect: jump,
        }
    };
    if s == 0.0 {
        return Ok(done(lo, 0.0, 0, true, Uniqueness::Unique, false));
    }
    let spliced = |y: f64| -> Result<f64> {
        let args = splice(&pts, chi, &Point::scalar(y)?)?;
        Ok(m.eval_unchecked(&args)?.first())
    };
    let mu = |y: f64| -> Result<f64> { Ok(spliced(y)? - y) };
    let res_tol = cfg.abs_tol * (1.0 + s);
    // solver-backed means are only accurate to their own tolerances
    let anomaly = res_tol + 10.0 * cfg.rel_tol * lo.abs().max(hi.abs());

    let grid: Vec<f64> = (0..=GRID)
        .map(|i| {
            if i == GRID {
                hi
            } else {
                lo + s * i as f64 / GRID as f64
            }
        })
        .collect();
    let mvals: Vec<f64> = grid.iter().map(|&y| spliced(y)).collect::<Result<_>>()?;
    let muv: Vec<f64> = mvals.iter().zip(&grid).map(|(mv, y)| mv - y).collect();
    if muv[0] < -anomaly || muv[GRID] > anomaly {
        return Err(MeanError::NotAMean(format!(
            "{}: m(min x) - min x = {}, m(max x) - max x = {}",
            m.label(),
            muv[0],
            muv[GRID]
        )));
    }
    let unique = sign_pattern(&muv, res_tol);
    let jump = jump_suspect(&spliced, &grid, &mvals, s)?;

    // mu(min x) >= 0 >= mu(max x) holds up to the anomaly band; the ends
    // take those signs regardless of rounding
    let pos = |i: usize| i == 0 || (i != GRID && muv[i] > 0.0);
    let i = (0..GRID)
        .find(|&i| pos(i) && !pos(i + 1))
        .expect("sign change on the grid");
    if muv[i] == 0.0 || muv[i + 1] == 0.0 {
        let y = if muv[i] == 0.0 { grid[i] } else { grid[i + 1] };
        return Ok(done(y, 0.0, 0, true, unique, jump));
    }
    // The fixed point can be badly conditioned when the spliced slots carry
    // little weight, so a small residual alone does not stop the search.
    let width_tol = |a: f64, b: f64| cfg.abs_tol + cfg.rel_tol * a.abs().min(b.abs());
    let (mut a, mut b, mut va, mut vb) = (grid[i], grid[i + 1], muv[i], muv[i + 1]);
    for it in 1..=cfg.max_iter {
        let mid = a + 0.5 * (b - a);
        if mid <= a || mid >= b {
            let (y, r) = if va.abs() <= vb.abs() {
                (a, va.abs())
            } else {
                (b, vb.abs())
            };
            return Ok(done(y, r, it, r <= res_tol, unique, jump));
        }
        let v = mu(mid)?;
        if v == 0.0 || (v.abs() <= res_tol && b - a <= width_tol(a, b)) {
            return Ok(done(mid, v.abs(), it, true, unique, jump));
        }
        if v > 0.0 {
            (a, va) = (mid, v);
        } else {
            (b, vb) = (mid, v);
        }
    }
    let mid = a + 0.5 * (b - a);
    Ok(done(mid, mu(mid)?.abs(), cfg.max_iter, false, unique, jump))
}

// mu >= 0 then mu <= 0 with at most a single grid point in the zero band is
// consistent with one fixed point.
fn sign_pattern(mu: &[f64], band: f64) -> Uniqueness {
    let signs: Vec<i8> = mu
        .iter()
        .map(|&v| {
            if v > band {
                1
            } else if v < -band {
                -1
            } else {
                0
            }
        })
        .collect();
    let mut seen_neg = false;
    for &sg in &signs {
        if sg < 0 {
            seen_neg = true;
        } else if seen_neg && sg >= 0 {
            return Uniqueness::MultipleSuspected;
        }
    }
    let zeros = signs.iter().filter(|&&sg| sg == 0).count();
    if zeros > 1 {
        Uniqueness::MultipleSuspected
    } else {
        Uniqueness::Unique
    }
}

// A grid gap far above the typical one is refined; a gap that survives
// twenty halvings is reported as a likely discontinuity.
fn jump_suspect(
    m: &dyn Fn(f64) -> Result<f64>,
    grid: &[f64],
    vals: &[f64],
    s: f64,
) -> Result<bool> {
    let gaps: Vec<f64> = vals.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let mut sorted = gaps.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    for (i, &g) in gaps.iter().enumerate() {
        if g <= 1e3 * median + 1e-9 * s {
            continue;
        }
        let (mut a, mut b, mut fa, mut fb) = (grid[i], grid[i + 1], vals[i], vals[i + 1]);
        for _ in 0..20 {
            let mid = 0.5 * (a + b);
            let fm = m(mid)?;
            if (fm - fa).abs() >= (fb - fm).abs() {
                b = mid;
                fb = fm;
            } else {
                a = mid;
                fa = fm;
            }
        }
        if (fb - fa).abs() > 0.5 * g {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Damped fixed-point iteration `y <- (1 - a) y + a M((x|chi)(y))` from the
/// centroid, restarted from each `x_j` to probe uniqueness.
pub fn reduce_vector(
    m: &MeanFn,
    chi: &Injection,
    x: &[Point],
    cfg: &SolverConfig,
) -> Result<ReductionResult> {
    cfg.validate()?;
    check_chi(m, chi, x.len())?;
    let k = x.len();
    let probe = splice(x, chi, &x[0])?;
    m.check_args(&probe)?;
    let s = spread(x);
    if s == 0.0 {
        let p = x[0].clone();
        return Ok(ReductionResult {
            reduced_value: p.clone(),
            fixed_point_residual: 0.0,
            certificate: SolverReport {
                value: p,
                residual: 0.0,
                iterations: 0,
                converged: true,
                trace: cfg.record_trace.then(Vec::new),
            },
            unique_flag: Uniqueness::Unique,
            continuity_suspect: false,
        });
    }
    let mut starts = vec![hull_combination(x, &Barycentric::uniform(k))?];
    starts.extend(x.iter().cloned());
    let runs: Vec<SolverReport<Point>> = starts
        .into_iter()
        .map(|y0| fixed_point(m, chi, x, y0, cfg, s))
        .collect::<Result<_>>()?;

    let all_converged = runs.iter().all(|r| r.converged);
    let main = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.converged)
        .map(|(i, _)| i)
        .next()
        .unwrap_or_else(|| {
            (0..runs.len())
                .min_by(|&a, &b| runs[a].residual.total_cmp(&runs[b].residual))
                .expect("at least one run")
        });
    let best = runs[main].clone();
    let disagree = runs
        .iter()
        .filter(|r| r.converged)
        .any(|r| r.value.dist(&best.value) > 1e-6 * (1.0 + s));
    let unique_flag = if disagree {
        Uniqueness::MultipleSuspected
    } else if all_converged {
        Uniqueness::Unique
    } else {
        Uniqueness::Unknown
    };
    Ok(ReductionResult {
        reduced_value: best.value.clone(),
        fixed_point_residual: best.residual,
        certificate: best,
        unique_flag,
        continuity_suspect: false,
    })
}

const OSCILLATION_WINDOW: usize = 10;
const STAGNATION_WINDOW: usize = 200;

fn fixed_point(
    m: &MeanFn,
    chi: &Injection,
    x: &[Point],
    y0: Point,
    cfg: &SolverConfig,
    s: f64,
) -> Result<SolverReport<Point>> {
    let tol = cfg.abs_tol * (1.0 + s);
    let mut alpha = cfg.damping;
    let mut y = y0;
    let mut trace = cfg.record_trace.then(Vec::new);
    let (mut prev_step, mut rising) = (f64::INFINITY, 0usize);
    let (mut best, mut since_best) = (f64::INFINITY, 0usize);
    for it in 0..=cfg.max_iter {
        let my = m.eval_unchecked(&splice(x, chi, &y)?)?;
        let r = my.dist(&y);
        if let Some(t) = trace.as_mut() {
            t.push(y.clone());
        }
        if r <= tol || it == cfg.max_iter || since_best > STAGNATION_WINDOW {
            return Ok(SolverReport {
                value: y,
                residual: r,
                iterations: it,
                converged: r <= tol,
                trace,
            });
        }
        if r < 0.5 * best {
            best = r;
            since_best = 0;
        } else {
            since_best += 1;
        }
        let step = alpha * r;
        rising = if step >= prev_step { rising + 1 } else { 0 };
        if rising >= OSCILLATION_WINDOW {
            alpha *= 0.5;
            rising = 0;
        }
        prev_step = alpha * r;
        y = y.scale(1.0 - alpha).add(&my.scale(alpha));
    }
    unreachable!("loop returns at it == max_iter")
}

/// Options shared by the randomized property checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub samples: usize,
    pub tol: f64,
    pub seed: u64,
    /// Defaults to [`Sampler::default_for`] the mean's domain.
    pub sampler: Option<Sampler>,
    pub solver: SolverConfig,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            samples: 100,
            tol: 1e-9,
            seed: 0,
            sampler: None,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyFailure {
    pub x: Vec<Point>,
    pub lhs: Point,
    pub rhs: Point,
    pub deviation: f64,
}

/// Outcome of a randomized identity check `lhs(x) = rhs(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub samples: usize,
    pub tol: f64,
    pub max_deviation: f64,
    pub passed: bool,
    /// The first few failures in sampling order.
    pub failures: Vec<PropertyFailure>,
    pub errors: Vec<String>,
}

const KEPT_FAILURES: usize = 10;

fn run_identity(
    lhs: &dyn Fn(&[Point]) -> Result<Point>,
    rhs: &dyn Fn(&[Point]) -> Result<Point>,
    k: usize,
    sampler: &Sampler,
    opts: &CheckOptions,
) -> PropertyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rep = PropertyReport {
        samples: opts.samples,
        tol: opts.tol,
        max_deviation: 0.0,
        passed: true,
        failures: Vec::new(),
        errors: Vec::new(),
    };
    for _ in 0..opts.samples {
        let x = sampler.sample_tuple(&mut rng, k);
        match lhs(&x).and_then(|l| Ok((l, rhs(&x)?))) {
            Ok((l, r)) => {
                let dev = l.dist(&r);
                rep.max_deviation = rep.max_deviation.max(dev);
                if !(dev <= opts.tol) {
                    rep.passed = false;
                    if rep.failures.len() < KEPT_FAILURES {
                        rep.failures.push(PropertyFailure {
                            x,
                            lhs: l,
                            rhs: r,
                            deviation: dev,
                        });
                    }
                }
            }
            Err(e) => {
                rep.passed = false;
                if rep.errors.len() < KEPT_FAILURES {
                    rep.errors.push(format!("{e} at x = {x:?}"));
                }
            }
        }
    }
    rep
}

fn sampler_for(m: &MeanFn, opts: &CheckOptions) -> Result<Sampler> {
    let s = match &opts.sampler {
        Some(s) => {
            let mut s = s.clone();
            s.dim = m.dim();
            s
        }
        None => Sampler::default_for(&m.domain(), m.dim())?,
    };
    s.validate()?;
    s.check_within(&m.domain())?;
    Ok(s)
}

/// Samples `A^w_chi(x) = A^{w_chi}(x)` for the weighted arithmetic mean on `R^dim`.
pub fn check_prop_a(
    weights: &[WeightFn],
    chi: &Injection,
    dim: usize,
    opts: &CheckOptions,
) -> Result<PropertyReport> {
    let full = MeanFn::weighted_arithmetic(weights.to_vec(), dim)?;
    let direct = MeanFn::weighted_arithmetic(select(weights, chi)?, dim)?;
    check_chi(&full, chi, chi.k())?;
    let sampler = sampler_for(&full, opts)?;
    let cfg = opts.solver.clone();
    Ok(run_identity(
        &|x| Ok(reduce(&full, chi, x, &cfg)?.into_result()?.reduced_value),
        &|x| direct.eval(x),
        chi.k(),
        &sampler,
        opts,
    ))
}

/// A tuple of scalar or generalized deviations.
#[derive(Debug, Clone)]
pub enum DeviationFamily {
    Scalar(DeviationTuple),
    Vector(Vec<GenDeviation>),
}

impl DeviationFamily {
    pub fn arity(&self) -> usize {
        match self {
            DeviationFamily::Scalar(e) => e.len(),
            DeviationFamily::Vector(e) => e.len(),
        }
    }

    /// The deviation mean `D^E`.
    pub fn mean(&self, cfg: &SolverConfig) -> Result<MeanFn> {
        match self {
            DeviationFamily::Scalar(e) => MeanFn::deviation(e.clone(), cfg.clone()),
            DeviationFamily::Vector(e) => MeanFn::gen_deviation(e.clone(), cfg.clone()),
        }
    }

    /// `E_chi`.
    pub fn select(&self, chi: &Injection) -> Result<Self> {
        Ok(match self {
            DeviationFamily::Scalar(e) => DeviationFamily::Scalar(e.select(chi)?),
            DeviationFamily::Vector(e) => DeviationFamily::Vector(select(e, chi)?),
        })
    }
}

/// Inner solves run this much tighter than the reduction itself, so that
/// their error does not swamp the fixed-point certificate.
pub const INNER_TIGHTENING: f64 = 1e-4;

/// Samples `(D^E)_chi(x) = D^{E_chi}(x)`.
pub fn check_thm_rgd(
    family: &DeviationFamily,
    chi: &Injection,
    opts: &CheckOptions,
) -> Result<PropertyReport> {
    let inner = SolverConfig {
        abs_tol: opts.solver.abs_tol * INNER_TIGHTENING,
        rel_tol: opts.solver.rel_tol * INNER_TIGHTENING,
        ..opts.solver.clone()
    };
    let full = family.mean(&inner)?;
    let direct = family.select(chi)?.mean(&inner)?;
    check_chi(&full, chi, chi.k())?;
    let sampler = sampler_for(&full, opts)?;
    let cfg = opts.solver.clone();
    Ok(run_identity(
        &|x| Ok(reduce(&full, chi, x, &cfg)?.into_result()?.reduced_value),
        &|x| direct.eval(x),
        chi.k(),
        &sampler,
        opts,
    ))
}
