//! Generalized deviations on boxes of `R^d`, the generalized deviation mean
//! as the solution of a variational inequality over the convex hull of the
//! arguments, and the route through convex potentials.

mod deviation;
mod solver;

pub use deviation::{
    make_norm_sq_potential, make_potential_deviation, GenDeviation, PotentialFn, RealFn2, VecFn2,
    GRADIENT_CHECK_TOL,
};
pub use solver::{
    gen_deviation_mean, gen_deviation_mean_from, grid_oracle_mean, lattice_spacing, potential_mean,
    potential_mean_from, slack_tol, HullPoint, Init,
};

use serde::{Deserialize, Serialize};

use crate::domain::{common_dim, Point};
use crate::error::{MeanError, Result};
use crate::hull;

/// A linear functional on `R^d`, acting by the dot product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Covector(Vec<f64>);

impl Covector {
    pub fn new(grad: Vec<f64>) -> Result<Self> {
        if let Some(c) = grad.iter().find(|c| !c.is_finite()) {
            return Err(MeanError::arg(format!("non-finite covector entry {c}")));
        }
        Ok(Covector(grad))
    }

    pub(crate) fn from_vec(grad: Vec<f64>) -> Self {
        Covector(grad)
    }

    pub fn zeros(dim: usize) -> Self {
        Covector(vec![0.0; dim])
    }

    pub fn grad(&self) -> &[f64] {
        &self.0
    }

    pub fn apply(&self, h: &[f64]) -> f64 {
        self.0.iter().zip(h).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.apply(&self.0).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

pub(crate) fn check_args(
    dims: impl Iterator<Item = (usize, crate::domain::Interval)>,
    n: usize,
    x: &[Point],
) -> Result<usize> {
    if n != x.len() {
        return Err(MeanError::arg(format!(
            "{} arguments for {n} deviations",
            x.len()
        )));
    }
    let d = common_dim(x)?;
    for (i, (di, dom)) in dims.enumerate() {
        if di != d {
            return Err(MeanError::arg(format!(
                "deviation {} acts on R^{di}, points live in R^{d}",
                i + 1
            )));
        }
        if let Some(c) = x[i].coords().iter().find(|c| !dom.contains(**c)) {
            return Err(MeanError::arg(format!(
                "argument {} has coordinate {c} outside {dom}",
                i + 1
            )));
        }
    }
    Ok(d)
}

fn check_gen(e: &[GenDeviation], x: &[Point]) -> Result<usize> {
    check_args(e.iter().map(|d| (d.dim(), d.domain())), e.len(), x)
}

pub(crate) fn e_sum_raw(e: &[GenDeviation], x: &[Point], y: &[f64]) -> (Vec<f64>, f64) {
    let mut g = vec![0.0; y.len()];
    let mut mag = 0.0;
    for (ei, xi) in e.iter().zip(x) {
        let c = ei.eval_raw(xi.coords(), y);
        mag += c.iter().map(|t| t * t).sum::<f64>().sqrt();
        for (a, b) in g.iter_mut().zip(&c) {
            *a += b;
        }
    }
    (g, mag)
}

/// `E_1(x_1, y) + ... + E_n(x_n, y)`.
pub fn gen_e_sum(e: &[GenDeviation], x: &[Point], y: &Point) -> Result<Covector> {
    let d = check_gen(e, x)?;
    if y.dim() != d {
        return Err(MeanError::arg("y has the wrong dimension"));
    }
    Covector::new(e_sum_raw(e, x, y.coords()).0)
}

/// Outcome of [`verify_vi`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViReport {
    pub holds: bool,
    /// One-based index of the most violated inequality.
    pub worst_index: usize,
    pub worst_slack: f64,
    pub hull_distance: f64,
}

/// `max_j g (x_j - y)` and its argmax.
pub(crate) fn max_slack(g: &[f64], x: &[Point], y: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (j, xj) in x.iter().enumerate() {
        let s: f64 = g
            .iter()
            .zip(xj.coords())
            .zip(y)
            .map(|((a, p), q)| a * (p - q))
            .sum();
        if s > best.0 {
            best = (s, j);
        }
    }
    best
}

/// Checks `(sum_i E_i(x_i, y))(x_j - y) <= tol` for every `j`. `y` must lie
/// within `tol (1 + max |x_i|)` of the hull of `x`.
pub fn verify_vi(e: &[GenDeviation], x: &[Point], y: &Point, tol: f64) -> Result<ViReport> {
    let d = check_gen(e, x)?;
    if y.dim() != d {
        return Err(MeanError::arg("y has the wrong dimension"));
    }
    if !(tol >= 0.0) {
        return Err(MeanError::arg("tolerance must be nonnegative"));
    }
    let scale = 1.0 + x.iter().map(Point::norm).fold(0.0, f64::max);
    let dist = hull::distance(x, y.coords())?;
    if dist > tol.max(1e-12) * scale {
        return Err(MeanError::HullViolation { distance: dist });
    }
    let g = e_sum_raw(e, x, y.coords()).0;
    let (s, j) = max_slack(&g, x, y.coords());
    Ok(ViReport {
        holds: s <= tol,
        worst_index: j + 1,
        worst_slack: s,
        hull_distance: dist,
    })
}
