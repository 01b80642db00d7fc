use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{hull_combination, Barycentric, Point, SolverConfig, SolverReport};
use crate::error::{MeanError, Result};
use crate::hull;

use super::{check_args, e_sum_raw, max_slack, GenDeviation, PotentialFn};

/// A point of `conv(x)` with barycentric weights certifying membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullPoint {
    pub point: Point,
    pub weights: Barycentric,
}

/// Starting point of an iterative hull solve.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Uniform,
    /// Random weights from a flat Dirichlet distribution.
    Random(u64),
    Weights(Barycentric),
}

impl Init {
    fn weights(&self, n: usize) -> Result<Barycentric> {
        match self {
            Init::Uniform => Ok(Barycentric::uniform(n)),
            Init::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                Barycentric::renormalized(&raw)
            }
            Init::Weights(w) if w.len() == n => Ok(w.clone()),
            Init::Weights(_) => Err(MeanError::arg(
                "initial weights do not match the tuple length",
            )),
        }
    }
}

/// Stationarity tolerance `abs_tol (1 + max |x_i|)`.
pub fn slack_tol(cfg: &SolverConfig, x: &[Point]) -> f64 {
    cfg.abs_tol * (1.0 + x.iter().map(Point::norm).fold(0.0, f64::max))
}

fn diameter(x: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in x.iter().enumerate() {
        for b in &x[i + 1..] {
            d = d.max(a.dist(b));
        }
    }
    d
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|t| t * t).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

// Slack below this level is lost in rounding of the sum of covectors, or
// in the error `err` of approximate covectors.
fn noise_floor(n: usize, mag: f64, x: &[Point], y: &[f64], err: f64) -> f64 {
    let r = x.iter().map(Point::norm).fold(0.0, f64::max) + norm(y);
    64.0 * f64::EPSILON * n as f64 * mag * r + FD_SAFETY * err * diameter(x)
}

// finite-difference error estimates are themselves rough
const FD_SAFETY: f64 = 4.0;

fn degenerate(x: &[Point], lam: Barycentric, trace: bool) -> SolverReport<HullPoint> {
    let hp = HullPoint {
        point: x[0].clone(),
        weights: lam,
    };
    SolverReport {
        trace: trace.then(|| vec![hp.clone()]),
        value: hp,
        residual: 0.0,
        iterations: 0,
        converged: true,
    }
}

const STALL_WINDOW: usize = 2000;
const MONOTONICITY_STRIKES: usize = 1;
const MERIT_RISES: usize = 200;

/// The generalized deviation mean, started from the centroid.
pub fn gen_deviation_mean(
    e: &[GenDeviation],
    x: &[Point],
    cfg: &SolverConfig,
) -> Result<SolverReport<HullPoint>> {
    gen_deviation_mean_from(e, x, cfg, &Init::Uniform)
}

/// Solves `(sum_i E_i(x_i, y))(x_j - y) <= 0` for all `j` over `y` in
/// `conv(x)` by projected extragradient steps with an adaptive step size.
pub fn gen_deviation_mean_from(
    e: &[GenDeviation],
    x: &[Point],
    cfg: &SolverConfig,
    init: &Init,
) -> Result<SolverReport<HullPoint>> {
    cfg.validate()?;
    check_args(e.iter().map(|d| (d.dim(), d.domain())), e.len(), x)?;
    let n = x.len();
    let mut lam = init.weights(n)?;
    if diameter(x) == 0.0 {
        return Ok(degenerate(x, lam, cfg.record_trace));
    }
    let tol = slack_tol(cfg, x);
    let g_at = |y: &[f64]| -> Result<(Vec<f64>, f64)> {
        let (g, mag) = e_sum_raw(e, x, y);
        if g.iter().all(|c| c.is_finite()) {
            Ok((g, mag))
        } else {
            Err(MeanError::InvalidDeviation(format!(
                "non-finite deviation sum at {y:?}"
            )))
        }
    };

    // Lipschitz estimate from the vertices against the centroid
    let c = hull_combination(x, &Barycentric::uniform(n))?;
    let (gc, _) = g_at(c.coords())?;
    let mut lip: f64 = 0.0;
    for xj in x {
        let r = xj.dist(&c);
        if r > 0.0 {
            lip = lip.max(dist(&g_at(xj.coords())?.0, &gc) / r);
        }
    }
    let mut tau = if lip > 0.0 {
        cfg.damping / lip
    } else {
        cfg.damping
    };

    let mut y = hull_combination(x, &lam)?.coords().to_vec();
    let mut trace = cfg.record_trace.then(Vec::new);
    let (mut best, mut since_best) = (f64::INFINITY, 0usize);
    let (mut strikes, mut rises, mut last_merit) = (0usize, 0usize, f64::INFINITY);
    let mut iterations = 0;

    let finish = |y: Vec<f64>,
                  lam: Barycentric,
                  s: f64,
                  it: usize,
                  ok: bool,
                  trace: Option<Vec<HullPoint>>| {
        SolverReport {
            value: HullPoint {
                point: Point::from_vec_unchecked(y),
                weights: lam,
            },
            residual: s.max(0.0),
            iterations: it,
            converged: ok,
            trace,
        }
    };

    loop {
        let (g, mag) = g_at(&y)?;
        let (s, _) = max_slack(&g, x, &y);
        let err: f64 = e
            .iter()
            .zip(x)
            .map(|(ei, xi)| ei.noise_at(xi.coords(), &y))
            .sum();
        let floor = noise_floor(n, mag, x, &y, err);
        if let Some(t) = trace.as_mut() {
            t.push(HullPoint {
                point: Point::from_vec_unchecked(y.clone()),
                weights: lam.clone(),
            });
        }
        if s <= tol.max(floor) {
            return Ok(finish(y, lam, s, iterations, true, trace));
        }
        if iterations >= cfg.max_iter || since_best > STALL_WINDOW {
            return Ok(finish(y, lam, s, iterations, false, trace));
        }
        iterations += 1;
        if s < best {
            if s < 0.999 * best {
                since_best = 0;
            }
            best = s;
        } else {
            since_best += 1;
        }
        let merit: f64 = x
            .iter()
            .map(|xj| {
                let v: f64 = g
                    .iter()
                    .zip(xj.coords())
                    .zip(&y)
                    .map(|((a, p), q)| a * (p - q))
                    .sum();
                v.max(0.0).powi(2)
            })
            .sum();
        rises = if merit > last_merit { rises + 1 } else { 0 };
        last_merit = merit;

        // extrapolation, shrinking the step until it is locally contractive
        let (yb, gb, dy, dg) = loop {
            let z: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a + tau * b).collect();
            let yb = hull::project(x, &z)?.point.coords().to_vec();
            let dy = dist(&y, &yb);
            if dy == 0.0 {
                break (yb, g.clone(), 0.0, 0.0);
            }
            let (gb, _) = g_at(&yb)?;
            let dg = dist(&g, &gb);
            if tau * dg <= 0.9 * dy {
                break (yb, gb, dy, dg);
            }
            tau = (0.5 * tau).min(0.8 * dy / dg);
        };
        if dy == 0.0 {
            // The step is lost in rounding. That certifies the slack only up
            // to projection accuracy over tau; otherwise try a longer step.
            let r = x.iter().map(Point::norm).fold(0.0, f64::max) + norm(&y);
            if s <= 64.0 * f64::EPSILON * r * diameter(x) / tau {
                return Ok(finish(y, lam, s, iterations, true, trace));
            }
            tau *= 2.0;
            continue;
        }
        let m: f64 = g
            .iter()
            .zip(&gb)
            .zip(y.iter().zip(&yb))
            .map(|((a, b), (p, q))| (a - b) * (p - q))
            .sum();
        if m > 1e-9 * dg * dy + floor * dy / (1.0 + norm(&y)) {
            strikes += 1;
        }
        if strikes >= MONOTONICITY_STRIKES || rises >= MERIT_RISES {
            return Err(MeanError::InvalidDeviation(format!(
                "the deviation sum is not monotone on the hull (evidence after {iterations} iterations)"
            )));
        }
        let z: Vec<f64> = y.iter().zip(&gb).map(|(a, b)| a + tau * b).collect();
        let p = hull::project(x, &z)?;
        y = p.point.coords().to_vec();
        lam = p.weights;
        if tau * dg < 0.5 * dy {
            tau *= 1.5;
        }
    }
}

fn check_potentials(f: &[PotentialFn], x: &[Point]) -> Result<usize> {
    check_args(f.iter().map(|p| (p.dim(), p.domain())), f.len(), x)
}

fn phi(f: &[PotentialFn], x: &[Point], v: &[f64]) -> (f64, f64) {
    f.iter().zip(x).fold((0.0, 0.0), |(s, a), (fi, xi)| {
        let t = fi.eval_raw(xi.coords(), v);
        (s + t, a + t.abs())
    })
}

fn grad_phi(f: &[PotentialFn], x: &[Point], v: &[f64]) -> (Vec<f64>, f64) {
    let mut g = vec![0.0; v.len()];
    let mut mag = 0.0;
    for (fi, xi) in f.iter().zip(x) {
        let c = fi.grad_raw(xi.coords(), v);
        mag += norm(&c);
        for (a, b) in g.iter_mut().zip(&c) {
            *a += b;
        }
    }
    (g, mag)
}

/// The minimizer of `sum_i F_i(x_i, v)` over `conv(x)`, started from the centroid.
pub fn potential_mean(
    f: &[PotentialFn],
    x: &[Point],
    cfg: &SolverConfig,
) -> Result<SolverReport<HullPoint>> {
    potential_mean_from(f, x, cfg, &Init::Uniform)
}

/// Projected gradient descent with Armijo backtracking (constant `1e-4`,
/// shrink `0.5`, first trial step `1`, warm-started afterwards).
pub fn potential_mean_from(
    f: &[PotentialFn],
    x: &[Point],
    cfg: &SolverConfig,
    init: &Init,
) -> Result<SolverReport<HullPoint>> {
    const ARMIJO: f64 = 1e-4;
    cfg.validate()?;
    check_potentials(f, x)?;
    let n = x.len();
    let mut lam = init.weights(n)?;
    if diameter(x) == 0.0 {
        return Ok(degenerate(x, lam, cfg.record_trace));
    }
    let fd = f.iter().any(|p| !p.has_gradient());
    let tol = slack_tol(cfg, x);
    let mut v = hull_combination(x, &lam)?.coords().to_vec();
    let mut t = 1.0;
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut iterations = 0;
    let (mut best, mut since_best) = (f64::INFINITY, 0usize);

    loop {
        let (g, mag) = grad_phi(f, x, &v);
        let (val, abs_sum) = phi(f, x, &v);
        if !(val.is_finite() && g.iter().all(|c| c.is_finite())) {
            return Err(MeanError::InvalidPotential(format!(
                "non-finite potential at {v:?}"
            )));
        }
        let neg: Vec<f64> = g.iter().map(|c| -c).collect();
        let (s, _) = max_slack(&neg, x, &v);
        let err: f64 = if fd {
            f.iter()
                .zip(x)
                .map(|(fi, xi)| fi.fd_error(xi.coords(), &v))
                .sum()
        } else {
            0.0
        };
        let floor = noise_floor(n, mag, x, &v, err);
        if let Some(tr) = trace.as_mut() {
            tr.push(HullPoint {
                point: Point::from_vec_unchecked(v.clone()),
                weights: lam.clone(),
            });
        }
        let stalled = since_best > STALL_WINDOW;
        if s <= tol.max(floor) || iterations >= cfg.max_iter || stalled {
            return Ok(SolverReport {
                value: HullPoint {
                    point: Point::from_vec_unchecked(v),
                    weights: lam,
                },
                residual: s.max(0.0),
                iterations,
                converged: s <= tol.max(floor),
                trace,
            });
        }
        iterations += 1;
        if s < 0.999 * best {
            since_best = 0;
        } else {
            since_best += 1;
        }
        best = best.min(s);

        let (mut accepted, mut lost) = (None, false);
        while t > 1e-300 {
            let z: Vec<f64> = v.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            let p = hull::project(x, &z)?;
            let vn = p.point.coords().to_vec();
            let d: Vec<f64> = vn.iter().zip(&v).map(|(a, b)| a - b).collect();
            let nd = norm(&d);
            if nd == 0.0 {
                lost = true;
                break;
            }
            let (valn, _) = phi(f, x, &vn);
            let gd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            // near the minimizer the decrease drowns in rounding, where a
            // gradient-based curvature test replaces the Armijo test
            let noisy = (valn - val).abs() <= 1e3 * f64::EPSILON * (abs_sum + valn.abs());
            let ok = if noisy {
                dist(&grad_phi(f, x, &vn).0, &g) * t <= nd
            } else {
                valn <= val + ARMIJO * gd
            };
            if ok {
                accepted = Some(p);
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some(p) => {
                v = p.point.coords().to_vec();
                lam = p.weights;
                t *= 2.0;
            }
            None if lost => {
                // as in the extragradient solver: certified up to projection
                // accuracy, or worth a longer step
                let r = x.iter().map(Point::norm).fold(0.0, f64::max) + norm(&v);
                if s <= 64.0 * f64::EPSILON * r * diameter(x) / t {
                    return Ok(SolverReport {
                        value: HullPoint {
                            point: Point::from_vec_unchecked(v),
                            weights: lam,
                        },
                        residual: s.max(0.0),
                        iterations,
                        converged: true,
                        trace,
                    });
                }
                t *= 4.0;
            }
            None => since_best = STALL_WINDOW + 1,
        }
    }
}

const MAX_LATTICE: u128 = 50_000_000;

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

/// Guaranteed resolution of [`grid_oracle_mean`] for isotropic potentials:
/// `(n - 1) diam(x) / (resolution - 1)`.
pub fn lattice_spacing(x: &[Point], resolution: usize) -> f64 {
    if x.len() < 2 || resolution < 2 {
        return 0.0;
    }
    (x.len() - 1) as f64 * diameter(x) / (resolution - 1) as f64
}

/// Best point of the barycentric lattice with step `1 / (resolution - 1)`.
pub fn grid_oracle_mean(f: &[PotentialFn], x: &[Point], resolution: usize) -> Result<Point> {
    if resolution < 2 {
        return Err(MeanError::arg("grid resolution must be at least 2"));
    }
    check_potentials(f, x)?;
    let n = x.len();
    if n == 1 {
        return Ok(x[0].clone());
    }
    let m = resolution - 1;
    if binomial((m + n - 1) as u128, (n - 1) as u128) > MAX_LATTICE {
        return Err(MeanError::arg(format!(
            "lattice with resolution {resolution} over {n} points is too large"
        )));
    }
    let d = x[0].dim();
    // odometer over the first n - 1 counts; the last one takes the remainder
    let mut counts = vec![0usize; n - 1];
    let mut used = 0usize;
    let mut best = (f64::INFINITY, vec![0.0; d]);
    let mut v = vec![0.0; d];
    'lattice: loop {
        v.iter_mut().for_each(|c| *c = 0.0);
        let last = m - used;
        for (xi, ci) in x
            .iter()
            .zip(counts.iter().copied().chain(std::iter::once(last)))
        {
            if ci > 0 {
                let w = ci as f64 / m as f64;
                for (a, b) in v.iter_mut().zip(xi.coords()) {
                    *a += w * b;
                }
            }
        }
        let (val, _) = phi(f, x, &v);
        if val < best.0 {
            best = (val, v.clone());
        }
        let mut i = 0;
        loop {
            if i == n - 1 {
                break 'lattice;
            }
            if used < m {
                counts[i] += 1;
                used += 1;
                break;
            }
            used -= counts[i];
            counts[i] = 0;
            i += 1;
        }
    }
    Point::new(best.1)
}
