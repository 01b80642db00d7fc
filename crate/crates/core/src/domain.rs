//! Shared domain types: intervals, points of `R^d`, injections `N_k -> N_n`,
//! barycentric weights, solver configuration and the splice/select operators.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{MeanError, Result};

/// A real interval with possibly infinite endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntervalRepr", into = "IntervalRepr")]
pub struct Interval {
    lo: f64,
    hi: f64,
    lo_open: bool,
    hi_open: bool,
}

/// Wire form: infinite endpoints are written as `null`.
#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    lo: Option<f64>,
    hi: Option<f64>,
    #[serde(default)]
    lo_open: bool,
    #[serde(default)]
    hi_open: bool,
}

impl TryFrom<IntervalRepr> for Interval {
    type Error = MeanError;

    fn try_from(r: IntervalRepr) -> Result<Self> {
        let lo = r.lo.unwrap_or(f64::NEG_INFINITY);
        let hi = r.hi.unwrap_or(f64::INFINITY);
        Interval::new(
            lo,
            hi,
            r.lo_open || lo.is_infinite(),
            r.hi_open || hi.is_infinite(),
        )
    }
}

impl From<Interval> for IntervalRepr {
    fn from(i: Interval) -> Self {
        IntervalRepr {
            lo: i.lo.is_finite().then_some(i.lo),
            hi: i.hi.is_finite().then_some(i.hi),
            lo_open: i.lo_open,
            hi_open: i.hi_open,
        }
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_open: bool, hi_open: bool) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() {
            return Err(MeanError::arg("interval endpoint is NaN"));
        }
        if !(lo < hi) {
            return Err(MeanError::arg(format!(
                "empty or degenerate interval [{lo}, {hi}]"
            )));
        }
        if lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(MeanError::arg("interval endpoints out of order"));
        }
        Ok(Interval {
            lo,
            hi,
            lo_open: lo_open || lo.is_infinite(),
            hi_open: hi_open || hi.is_infinite(),
        })
    }

    pub fn closed(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, false, false)
    }

    pub fn open(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, true, true)
    }

    pub fn real_line() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            lo_open: true,
            hi_open: true,
        }
    }

    /// The open half line `]0, +inf[`.
    pub fn positive() -> Self {
        Interval {
            lo: 0.0,
            hi: f64::INFINITY,
            lo_open: true,
            hi_open: true,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, t: f64) -> bool {
        if t.is_nan() {
            return false;
        }
        let above = if self.lo_open {
            t > self.lo
        } else {
            t >= self.lo
        };
        let below = if self.hi_open {
            t < self.hi
        } else {
            t <= self.hi
        };
        above && below
    }

    /// Intersection, or `None` when it is empty or a single point.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let (lo, lo_open) = if self.lo > other.lo {
            (self.lo, self.lo_open)
        } else if other.lo > self.lo {
            (other.lo, other.lo_open)
        } else {
            (self.lo, self.lo_open || other.lo_open)
        };
        let (hi, hi_open) = if self.hi < other.hi {
            (self.hi, self.hi_open)
        } else if other.hi < self.hi {
            (other.hi, other.hi_open)
        } else {
            (self.hi, self.hi_open || other.hi_open)
        };
        Interval::new(lo, hi, lo_open, hi_open).ok()
    }

    pub fn contains_all(&self, ts: &[f64]) -> bool {
        ts.iter().all(|&t| self.contains(t))
    }

    /// Draws an interior point. Unbounded sides are sampled on a logarithmic
    /// scale so that both tiny and large magnitudes get exercised.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let t = rng_unit(rng);
        let mag = 10f64.powf(-2.0 + 4.0 * t);
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => self.lo + (self.hi - self.lo) * (0.01 + 0.98 * t),
            (true, false) => self.lo + mag,
            (false, true) => self.hi - mag,
            (false, false) => {
                if rng_unit(rng) < 0.5 {
                    -mag
                } else {
                    mag
                }
            }
        }
    }
}

fn rng_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_open { '(' } else { '[' };
        let r = if self.hi_open { ')' } else { ']' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

/// A point of `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl TryFrom<Vec<f64>> for Point {
    type Error = MeanError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(MeanError::arg("point must have at least one coordinate"));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(MeanError::arg(format!("non-finite coordinate {c}")));
        }
        Ok(Point(coords))
    }

    /// One-dimensional point.
    pub fn scalar(t: f64) -> Result<Self> {
        Self::new(vec![t])
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Point(vec![0.0; dim.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// First coordinate; the value of a one-dimensional point.
    pub fn first(&self) -> f64 {
        self.0[0]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Point) -> Point {
        Point(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, s: f64) -> Point {
        Point(self.0.iter().map(|a| a * s).collect())
    }

    /// `self + s * dir`
    pub fn axpy(&self, s: f64, dir: &[f64]) -> Point {
        Point(self.0.iter().zip(dir).map(|(a, d)| a + s * d).collect())
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Checks that all points share one dimension and returns it.
pub fn common_dim(x: &[Point]) -> Result<usize> {
    let first = x.first().ok_or_else(|| MeanError::arg("empty tuple"))?;
    let d = first.dim();
    if x.iter().any(|p| p.dim() != d) {
        return Err(MeanError::arg("points of different dimensions"));
    }
    Ok(d)
}

/// Injective map `N_k -> N_n`. Stored zero-based; written one-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InjectionRepr", into = "InjectionRepr")]
pub struct Injection {
    n: usize,
    map: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct InjectionRepr {
    n: usize,
    map: Vec<usize>,
}

impl TryFrom<InjectionRepr> for Injection {
    type Error = MeanError;

    fn try_from(r: InjectionRepr) -> Result<Self> {
        Injection::new(r.n, &r.map)
    }
}

impl From<Injection> for InjectionRepr {
    fn from(c: Injection) -> Self {
        InjectionRepr {
            n: c.n,
            map: c.one_based(),
        }
    }
}

impl Injection {
    /// Builds `chi` from its one-based image list `(chi(1), ..., chi(k))`.
    pub fn new(n: usize, one_based: &[usize]) -> Result<Self> {
        let mut map = Vec::with_capacity(one_based.len());
        for &i in one_based {
            if i == 0 || i > n {
                return Err(MeanError::arg(format!(
                    "injection entry {i} outside 1..={n}"
                )));
            }
            map.push(i - 1);
        }
        Self::from_zero_based(n, map)
    }

    pub fn from_zero_based(n: usize, map: Vec<usize>) -> Result<Self> {
        if map.is_empty() {
            return Err(MeanError::arg("injection must have k >= 1"));
        }
        if map.len() > n {
            return Err(MeanError::arg(format!("k = {} exceeds n = {n}", map.len())));
        }
        let mut seen = vec![false; n];
        for &i in &map {
            if i >= n {
                return Err(MeanError::arg(format!(
                    "injection entry {} outside 1..={n}",
                    i + 1
                )));
            }
            if seen[i] {
                return Err(MeanError::arg(format!("injection repeats {}", i + 1)));
            }
            seen[i] = true;
        }
        Ok(Injection { n, map })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_zero_based(n, (0..n).collect())
    }

    pub fn k(&self) -> usize {
        self.map.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Zero-based image of the zero-based index `j`.
    pub fn image(&self, j: usize) -> usize {
        self.map[j]
    }

    pub fn zero_based(&self) -> &[usize] {
        &self.map
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.map.iter().map(|i| i + 1).collect()
    }

    pub fn is_bijection(&self) -> bool {
        self.map.len() == self.n
    }

    /// Zero-based indices of `N_n` not hit by the map, ascending.
    pub fn complement(&self) -> Vec<usize> {
        (0..self.n).filter(|i| !self.map.contains(i)).collect()
    }
}

impl fmt::Display for Injection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.one_based().iter().map(|i| i.to_string()).collect();
        write!(f, "({}) -> N_{}", parts.join(","), self.n)
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barycentric {
    weights: Vec<f64>,
}

pub const BARYCENTRIC_SUM_TOL: f64 = 1e-12;

impl Barycentric {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(MeanError::arg("barycentric weights must be nonempty"));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(MeanError::arg(format!(
                "barycentric weight {w} is not a nonnegative number"
            )));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > BARYCENTRIC_SUM_TOL {
            return Err(MeanError::arg(format!(
                "barycentric weights sum to {s}, not 1"
            )));
        }
        Ok(Barycentric { weights })
    }

    pub fn uniform(n: usize) -> Self {
        Barycentric {
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Indicator weight of vertex `i` among `n`.
    pub fn vertex(n: usize, i: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[i] = 1.0;
        Barycentric { weights }
    }

    /// Clamps tiny negatives (down to -1e-12) and rescales to unit sum.
    pub fn renormalized(raw: &[f64]) -> Result<Self> {
        if raw.iter().any(|w| !w.is_finite() || *w < -1e-12) {
            return Err(MeanError::arg("weights cannot be renormalized"));
        }
        let clamped: Vec<f64> = raw.iter().map(|w| w.max(0.0)).collect();
        let s: f64 = clamped.iter().sum();
        if s <= 0.0 {
            return Err(MeanError::arg("weights sum to zero"));
        }
        Ok(Barycentric {
            weights: clamped.into_iter().map(|w| w / s).collect(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Tolerances and iteration limits shared by every numerical solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Relaxation factor in `(0, 1]` for fixed-point and extragradient steps.
    pub damping: f64,
    pub grid_oracle_resolution: usize,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_iter: 10_000,
            damping: 1.0,
            grid_oracle_resolution: 2001,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(MeanError::arg("abs_tol must be positive"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(MeanError::arg("rel_tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(MeanError::arg("max_iter must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(MeanError::arg("damping must lie in (0, 1]"));
        }
        if self.grid_oracle_resolution < 2 {
            return Err(MeanError::arg("grid_oracle_resolution must be at least 2"));
        }
        Ok(())
    }

    pub fn with_abs_tol(mut self, t: f64) -> Self {
        self.abs_tol = t;
        self
    }

    pub fn with_rel_tol(mut self, t: f64) -> Self {
        self.rel_tol = t;
        self
    }

    pub fn with_max_iter(mut self, m: usize) -> Self {
        self.max_iter = m;
        self
    }

    pub fn with_damping(mut self, d: f64) -> Self {
        self.damping = d;
        self
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }
}

/// Outcome of a numerical solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport<V> {
    pub value: V,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none", default = "no_trace")]
    pub trace: Option<Vec<V>>,
}

fn no_trace<V>() -> Option<Vec<V>> {
    None
}

impl<V> SolverReport<V> {
    /// Turns a non-converged report into [`MeanError::NoConvergence`].
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(MeanError::NoConvergence {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }

    pub fn map<W>(self, mut f: impl FnMut(V) -> W) -> SolverReport<W> {
        SolverReport {
            value: f(self.value),
            residual: self.residual,
            iterations: self.iterations,
            converged: self.converged,
            trace: self.trace.map(|t| t.into_iter().map(f).collect()),
        }
    }
}

/// `(x|chi)(y)`: the `n`-tuple carrying `x_j` at `chi(j)` and `y` elsewhere.
pub fn splice<S: Clone>(x: &[S], chi: &Injection, y: &S) -> Result<Vec<S>> {
    if x.len() != chi.k() {
        return Err(MeanError::arg(format!(
            "tuple of length {} does not match injection with k = {}",
            x.len(),
            chi.k()
        )));
    }
    let mut out = vec![y.clone(); chi.n()];
    for (j, xj) in x.iter().enumerate() {
        out[chi.image(j)] = xj.clone();
    }
    Ok(out)
}

/// `u_chi = (u_{chi(1)}, ..., u_{chi(k)})`.
pub fn select<S: Clone>(x: &[S], chi: &Injection) -> Result<Vec<S>> {
    if x.len() != chi.n() {
        return Err(MeanError::arg(format!(
            "tuple of length {} does not match injection with n = {}",
            x.len(),
            chi.n()
        )));
    }
    Ok(chi.zero_based().iter().map(|&i| x[i].clone()).collect())
}

/// `sum_i lambda_i x_i`.
pub fn hull_combination(x: &[Point], lambda: &Barycentric) -> Result<Point> {
    if x.len() != lambda.len() {
        return Err(MeanError::arg("weight count does not match tuple length"));
    }
    let d = common_dim(x)?;
    let mut acc = vec![0.0; d];
    for (p, &w) in x.iter().zip(lambda.weights()) {
        if w == 0.0 {
            continue;
        }
        for (a, c) in acc.iter_mut().zip(p.coords()) {
            *a += w * c;
        }
    }
    Ok(Point(acc))
}

/// Membership in `[min(x), max(x)]`.
pub fn in_hull_1d(x: &[f64], y: f64) -> bool {
    match min_max(x) {
        Some((lo, hi)) => lo <= y && y <= hi,
        None => false,
    }
}

pub(crate) fn min_max(x: &[f64]) -> Option<(f64, f64)> {
    let first = *x.first()?;
    Some(
        x.iter()
            .fold((first, first), |(lo, hi), &t| (lo.min(t), hi.max(t))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splice_places_values() {
        let chi = Injection::new(4, &[2, 4]).unwrap();
        assert_eq!(
            splice(&['a', 'b'], &chi, &'c').unwrap(),
            vec!['c', 'a', 'c', 'b']
        );

        let id = Injection::identity(3).unwrap();
        assert_eq!(
            splice(&["a", "b", "c"], &id, &"z").unwrap(),
            vec!["a", "b", "c"]
        );

        let chi = Injection::new(3, &[3]).unwrap();
        assert_eq!(splice(&[7.0], &chi, &1.0).unwrap(), vec![1.0, 1.0, 7.0]);
    }

    #[test]
    fn splice_rejects_arity_mismatch() {
        let chi = Injection::new(4, &[2, 4]).unwrap();
        assert!(matches!(
            splice(&[1, 2, 3], &chi, &0),
            Err(MeanError::InvalidArgument(_))
        ));
    }

    #[test]
    fn select_picks_indices() {
        let chi = Injection::new(3, &[3, 1]).unwrap();
        assert_eq!(select(&[10, 20, 30], &chi).unwrap(), vec![30, 10]);
        let chi = Injection::new(1, &[1]).unwrap();
        assert_eq!(select(&[5], &chi).unwrap(), vec![5]);
        let chi = Injection::new(4, &[2, 4]).unwrap();
        assert_eq!(select(&[1, 2, 3, 4], &chi).unwrap(), vec![2, 4]);
        assert!(select(&[1, 2, 3], &chi).is_err());
    }

    #[test]
    fn injection_validation() {
        assert!(Injection::new(3, &[1, 1]).is_err());
        assert!(Injection::new(3, &[0]).is_err());
        assert!(Injection::new(3, &[4]).is_err());
        assert!(Injection::new(2, &[1, 2, 1]).is_err());
        assert!(Injection::new(3, &[]).is_err());
        let chi = Injection::new(5, &[4, 2]).unwrap();
        assert_eq!(chi.complement(), vec![0, 2, 4]);
        assert!(!chi.is_bijection());
    }

    fn pts(v: &[&[f64]]) -> Vec<Point> {
        v.iter().map(|c| Point::new(c.to_vec()).unwrap()).collect()
    }

    #[test]
    fn hull_combination_examples() {
        let x = pts(&[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0]]);
        let y = hull_combination(&x, &Barycentric::uniform(3)).unwrap();
        assert!((y.coords()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((y.coords()[1] - 2.0 / 3.0).abs() < 1e-15);

        let x = pts(&[&[1.0, 1.0], &[5.0, 5.0]]);
        let y = hull_combination(&x, &Barycentric::new(vec![1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(y.coords(), &[1.0, 1.0]);

        let x = pts(&[&[0.0], &[10.0]]);
        let y = hull_combination(&x, &Barycentric::new(vec![0.25, 0.75]).unwrap()).unwrap();
        assert_eq!(y.coords(), &[7.5]);
    }

    #[test]
    fn hull_combination_dimension_mismatch() {
        let x = pts(&[&[0.0, 0.0], &[1.0]]);
        assert!(hull_combination(&x, &Barycentric::uniform(2)).is_err());
    }

    #[test]
    fn in_hull_1d_examples() {
        assert!(in_hull_1d(&[1.0, 5.0, 3.0], 4.0));
        assert!(in_hull_1d(&[1.0, 5.0, 3.0], 5.0));
        assert!(!in_hull_1d(&[2.0, 2.0], 2.0001));
    }

    #[test]
    fn barycentric_sum_window() {
        assert!(Barycentric::new(vec![0.5, 0.5 + 0.5e-12]).is_ok());
        assert!(Barycentric::new(vec![0.5, 0.5 + 2e-12]).is_err());
        assert!(Barycentric::new(vec![1.5, -0.5]).is_err());
    }

    #[test]
    fn interval_membership() {
        let i = Interval::new(0.0, 1.0, true, false).unwrap();
        assert!(!i.contains(0.0));
        assert!(i.contains(1.0));
        assert!(Interval::positive().contains(1e300));
        assert!(!Interval::positive().contains(0.0));
        assert!(Interval::closed(1.0, 1.0).is_err());
        assert!(Interval::closed(2.0, 1.0).is_err());
    }

    #[test]
    fn interval_json_uses_null_for_infinity() {
        let s = serde_json::to_string(&Interval::positive()).unwrap();
        assert_eq!(s, r#"{"lo":0.0,"hi":null,"lo_open":true,"hi_open":true}"#);
        let back: Interval = serde_json::from_str(&s).unwrap();
        assert_eq!(back, Interval::positive());
    }

    #[test]
    fn point_rejects_non_finite() {
        assert!(Point::new(vec![1.0, f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert!(Point::new(vec![]).is_err());
    }
}
