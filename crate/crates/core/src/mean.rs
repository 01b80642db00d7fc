//! Means as first-class values: an arity, a kind (scalar or vector), a
//! coordinate domain and an evaluator.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{common_dim, min_max, Interval, Point, SolverConfig, SolverReport};
use crate::error::{MeanError, Result};
use crate::hull;
use crate::scalar::{
    bajraktarevic_mean, deviation_mean, gini_mean, holder_mean, matkowski_mean,
    weighted_arith_mean_points, DeviationTuple, GeneratorFn, WeightFn,
};
use crate::vector::{gen_deviation_mean, potential_mean, GenDeviation, PotentialFn};

pub type MeanEval = Arc<dyn Fn(&[Point]) -> Result<SolverReport<Point>> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanKind {
    Scalar,
    Vector { dim: usize },
}

/// An `n`-variable mean on `domain^d`.
#[derive(Clone)]
pub struct MeanFn {
    arity: usize,
    kind: MeanKind,
    domain: Interval,
    symmetric: bool,
    label: String,
    eval: MeanEval,
}

impl fmt::Debug for MeanFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeanFn")
            .field("arity", &self.arity)
            .field("kind", &self.kind)
            .field("domain", &self.domain)
            .field("symmetric", &self.symmetric)
            .field("label", &self.label)
            .finish()
    }
}

/// Sample count used by [`MeanFn::validate`] when called from constructors.
pub const MEAN_VALIDATION_SAMPLES: usize = 32;

fn exact(value: Point) -> SolverReport<Point> {
    SolverReport {
        value,
        residual: 0.0,
        iterations: 0,
        converged: true,
        trace: None,
    }
}

fn firsts(x: &[Point]) -> Vec<f64> {
    x.iter().map(Point::first).collect()
}

fn scalar_report(r: SolverReport<f64>) -> Result<SolverReport<Point>> {
    let SolverReport {
        value,
        residual,
        iterations,
        converged,
        trace,
    } = r;
    Ok(SolverReport {
        value: Point::scalar(value)?,
        residual,
        iterations,
        converged,
        trace: trace.map(|t| {
            t.into_iter()
                .filter_map(|v| Point::scalar(v).ok())
                .collect()
        }),
    })
}

fn all_same<T, F: Fn(&T) -> String>(xs: &[T], key: F) -> bool {
    xs.windows(2).all(|w| key(&w[0]) == key(&w[1]))
}

impl MeanFn {
    /// Wraps an evaluator and samples the mean property and reflexivity.
    pub fn new<F>(
        arity: usize,
        kind: MeanKind,
        domain: Interval,
        symmetric: bool,
        label: impl Into<String>,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(&[Point]) -> Result<SolverReport<Point>> + Send + Sync + 'static,
    {
        let m = Self::trusted(arity, kind, domain, symmetric, label, Arc::new(f))?;
        m.validate(MEAN_VALIDATION_SAMPLES)?;
        Ok(m)
    }

    pub(crate) fn trusted(
        arity: usize,
        kind: MeanKind,
        domain: Interval,
        symmetric: bool,
        label: impl Into<String>,
        eval: MeanEval,
    ) -> Result<Self> {
        if arity == 0 {
            return Err(MeanError::arg("a mean needs at least one argument"));
        }
        if kind == (MeanKind::Vector { dim: 0 }) {
            return Err(MeanError::arg("dimension must be positive"));
        }
        Ok(MeanFn {
            arity,
            kind,
            domain,
            symmetric,
            label: label.into(),
            eval,
        })
    }

    /// A scalar mean from a closure on reals.
    pub fn scalar<F>(
        arity: usize,
        domain: Interval,
        symmetric: bool,
        label: impl Into<String>,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    {
        Self::new(
            arity,
            MeanKind::Scalar,
            domain,
            symmetric,
            label,
            move |x: &[Point]| Ok(exact(Point::scalar(f(&firsts(x))?)?)),
        )
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn kind(&self) -> MeanKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            MeanKind::Scalar => 1,
            MeanKind::Vector { dim } => dim,
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.kind == MeanKind::Scalar
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub(crate) fn check_args(&self, x: &[Point]) -> Result<()> {
        if x.len() != self.arity {
            return Err(MeanError::arg(format!(
                "{} takes {} arguments, got {}",
                self.label,
                self.arity,
                x.len()
            )));
        }
        let d = common_dim(x)?;
        if d != self.dim() {
            return Err(MeanError::arg(format!(
                "{} expects points of dimension {}",
                self.label,
                self.dim()
            )));
        }
        for p in x {
            if let Some(c) = p.coords().iter().find(|c| !self.domain.contains(**c)) {
                return Err(MeanError::arg(format!(
                    "coordinate {c} outside {}",
                    self.domain
                )));
            }
        }
        Ok(())
    }

    /// Evaluates with the solver report of the underlying computation.
    pub fn eval_report(&self, x: &[Point]) -> Result<SolverReport<Point>> {
        self.check_args(x)?;
        (self.eval)(x)
    }

    pub(crate) fn eval_unchecked(&self, x: &[Point]) -> Result<Point> {
        Ok((self.eval)(x)?.into_result()?.value)
    }

    pub fn eval(&self, x: &[Point]) -> Result<Point> {
        Ok(self.eval_report(x)?.into_result()?.value)
    }

    pub fn eval_scalar(&self, x: &[f64]) -> Result<f64> {
        let pts = x
            .iter()
            .map(|&t| Point::scalar(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.eval(&pts)?.first())
    }

    /// Samples `M(x) in conv(x)` and `M(u, ..., u) = u` on random tuples.
    pub fn validate(&self, samples: usize) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x3ea_7e57);
        let d = self.dim();
        for _ in 0..samples {
            let x: Vec<Point> = (0..self.arity)
                .map(|_| Point::new((0..d).map(|_| self.domain.sample(&mut rng)).collect()))
                .collect::<Result<_>>()?;
            let y = self.eval(&x)?;
            check_in_hull(&x, &y)
                .map_err(|e| MeanError::NotAMean(format!("{}: {e}", self.label)))?;
            let u = x[0].clone();
            let yu = self.eval(&vec![u.clone(); self.arity])?;
            if yu.dist(&u) > 1e-12 * (1.0 + u.norm()) {
                return Err(MeanError::NotAMean(format!(
                    "{}: M({u}, ..., {u}) = {yu}",
                    self.label
                )));
            }
        }
        Ok(())
    }

    // built-in families

    /// `(x_1 + ... + x_n) / n` on `R^dim`.
    pub fn arithmetic(arity: usize, dim: usize) -> Result<Self> {
        let kind = if dim == 1 {
            MeanKind::Scalar
        } else {
            MeanKind::Vector { dim }
        };
        Self::trusted(
            arity,
            kind,
            Interval::real_line(),
            true,
            format!("arithmetic(n={arity})"),
            Arc::new(move |x: &[Point]| {
                let n = x.len() as f64;
                let mut acc = vec![0.0; x[0].dim()];
                for p in x {
                    for (a, c) in acc.iter_mut().zip(p.coords()) {
                        *a += c;
                    }
                }
                Ok(exact(Point::new(acc.into_iter().map(|a| a / n).collect())?))
            }),
        )
    }

    /// `sum w_i(x_i) x_i / sum w_i(x_i)` on `R^dim`.
    pub fn weighted_arithmetic(weights: Vec<WeightFn>, dim: usize) -> Result<Self> {
        let domain = common_domain(weights.iter().map(WeightFn::domain))?;
        let kind = if dim == 1 {
            MeanKind::Scalar
        } else {
            MeanKind::Vector { dim }
        };
        let symmetric = all_same(&weights, |w| w.label().to_string());
        let label = format!("weighted-arithmetic(n={})", weights.len());
        Self::trusted(
            weights.len(),
            kind,
            domain,
            symmetric,
            label,
            Arc::new(move |x: &[Point]| Ok(exact(weighted_arith_mean_points(&weights, x)?))),
        )
    }

    pub fn holder(p: f64, arity: usize) -> Result<Self> {
        if !p.is_finite() {
            return Err(MeanError::arg("exponent must be finite"));
        }
        Self::trusted(
            arity,
            MeanKind::Scalar,
            Interval::positive(),
            true,
            format!("holder(p={p}, n={arity})"),
            Arc::new(move |x: &[Point]| Ok(exact(Point::scalar(holder_mean(p, &firsts(x))?)?))),
        )
    }

    pub fn gini(p: f64, q: f64, arity: usize) -> Result<Self> {
        if !p.is_finite() || !q.is_finite() {
            return Err(MeanError::arg("exponents must be finite"));
        }
        Self::trusted(
            arity,
            MeanKind::Scalar,
            Interval::positive(),
            true,
            format!("gini(p={p}, q={q}, n={arity})"),
            Arc::new(move |x: &[Point]| Ok(exact(Point::scalar(gini_mean(p, q, &firsts(x))?)?))),
        )
    }

    /// `f^{-1}((f(x_1) + ... + f(x_n)) / n)`.
    pub fn quasi_arithmetic(f: GeneratorFn, arity: usize) -> Result<Self> {
        let one = WeightFn::constant(1.0)?;
        let mut m = Self::bajraktarevic(f, vec![one; arity])?;
        m.symmetric = true;
        m.label = format!("quasi-arithmetic(n={arity})");
        Ok(m)
    }

    pub fn bajraktarevic(f: GeneratorFn, weights: Vec<WeightFn>) -> Result<Self> {
        let domain =
            common_domain(std::iter::once(f.domain()).chain(weights.iter().map(WeightFn::domain)))?;
        let symmetric = all_same(&weights, |w| w.label().to_string());
        Self::trusted(
            weights.len(),
            MeanKind::Scalar,
            domain,
            symmetric,
            format!("bajraktarevic(f={}, n={})", f.label(), weights.len()),
            Arc::new(move |x: &[Point]| {
                Ok(exact(Point::scalar(bajraktarevic_mean(
                    &f,
                    &weights,
                    &firsts(x),
                )?)?))
            }),
        )
    }

    pub fn matkowski(fs: Vec<GeneratorFn>, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let domain = common_domain(fs.iter().map(GeneratorFn::domain))?;
        let symmetric = all_same(&fs, |g| g.label().to_string());
        Self::trusted(
            fs.len(),
            MeanKind::Scalar,
            domain,
            symmetric,
            format!("matkowski(n={})", fs.len()),
            Arc::new(move |x: &[Point]| {
                Ok(exact(Point::scalar(matkowski_mean(
                    &fs,
                    &firsts(x),
                    &cfg,
                )?)?))
            }),
        )
    }

    /// The deviation mean of a scalar deviation tuple.
    pub fn deviation(e: DeviationTuple, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let symmetric = all_same(&e.iter().collect::<Vec<_>>(), |d| d.label().to_string());
        Self::trusted(
            e.len(),
            MeanKind::Scalar,
            e.domain(),
            symmetric,
            format!("deviation(n={})", e.len()),
            Arc::new(move |x: &[Point]| scalar_report(deviation_mean(&e, &firsts(x), &cfg)?)),
        )
    }

    /// The generalized deviation mean of `(E_1, ..., E_n)`.
    pub fn gen_deviation(e: Vec<GenDeviation>, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let first = e
            .first()
            .ok_or_else(|| MeanError::arg("need at least one deviation"))?;
        let dim = first.dim();
        if e.iter().any(|d| d.dim() != dim) {
            return Err(MeanError::arg("deviations act on different dimensions"));
        }
        let domain = common_domain(e.iter().map(GenDeviation::domain))?;
        let symmetric = all_same(&e, |d| d.label().to_string());
        let kind = if dim == 1 {
            MeanKind::Scalar
        } else {
            MeanKind::Vector { dim }
        };
        Self::trusted(
            e.len(),
            kind,
            domain,
            symmetric,
            format!("gen-deviation(n={}, d={dim})", e.len()),
            Arc::new(move |x: &[Point]| Ok(gen_deviation_mean(&e, x, &cfg)?.map(|h| h.point))),
        )
    }

    /// The minimizer of `sum_i F_i(x_i, .)` over `conv(x)`.
    pub fn potential(f: Vec<PotentialFn>, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let first = f
            .first()
            .ok_or_else(|| MeanError::arg("need at least one potential"))?;
        let dim = first.dim();
        if f.iter().any(|p| p.dim() != dim) {
            return Err(MeanError::arg("potentials act on different dimensions"));
        }
        let domain = common_domain(f.iter().map(PotentialFn::domain))?;
        let symmetric = all_same(&f, |p| p.label().to_string());
        let kind = if dim == 1 {
            MeanKind::Scalar
        } else {
            MeanKind::Vector { dim }
        };
        Self::trusted(
            f.len(),
            kind,
            domain,
            symmetric,
            format!("potential(n={}, d={dim})", f.len()),
            Arc::new(move |x: &[Point]| Ok(potential_mean(&f, x, &cfg)?.map(|h| h.point))),
        )
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

pub(crate) fn common_domain(mut it: impl Iterator<Item = Interval>) -> Result<Interval> {
    let first = it.next().ok_or_else(|| MeanError::arg("empty tuple"))?;
    it.try_fold(first, |acc, d| {
        acc.intersect(&d)
            .ok_or_else(|| MeanError::arg("component domains do not overlap"))
    })
}

/// Tolerance of the hull-membership checks: exact up to `1e-12` relative for
/// scalars, `1e-9` relative distance for points.
pub(crate) fn check_in_hull(x: &[Point], y: &Point) -> Result<()> {
    let scale = 1.0 + x.iter().map(Point::norm).fold(0.0, f64::max);
    if y.dim() == 1 {
        let (lo, hi) = min_max(&firsts(x)).expect("nonempty");
        let t = y.first();
        let slack = 1e-12 * scale;
        if t < lo - slack || t > hi + slack {
            let distance = (lo - t).max(t - hi);
            return Err(MeanError::HullViolation { distance });
        }
        return Ok(());
    }
    let distance = hull::distance(x, y.coords())?;
    if distance > 1e-9 * scale {
        return Err(MeanError::HullViolation { distance });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ScalarDeviation;

    fn sc(x: &[f64]) -> Vec<Point> {
        x.iter().map(|&t| Point::scalar(t).unwrap()).collect()
    }

    #[test]
    fn builtins_are_means() {
        let cfg = SolverConfig::default();
        let means = vec![
            MeanFn::arithmetic(3, 1).unwrap(),
            MeanFn::arithmetic(2, 3).unwrap(),
            MeanFn::holder(-1.5, 4).unwrap(),
            MeanFn::gini(2.0, 0.5, 3).unwrap(),
            MeanFn::quasi_arithmetic(GeneratorFn::exp(), 3).unwrap(),
            MeanFn::matkowski(
                vec![GeneratorFn::identity(), GeneratorFn::exp()],
                cfg.clone(),
            )
            .unwrap(),
            MeanFn::deviation(
                DeviationTuple::repeat(ScalarDeviation::gini(1.0, 2.0).unwrap(), 3).unwrap(),
                cfg.clone(),
            )
            .unwrap(),
            MeanFn::gen_deviation(
                vec![GenDeviation::inner_product(2, &WeightFn::constant(2.0).unwrap()).unwrap(); 3],
                cfg.clone(),
            )
            .unwrap(),
        ];
        for m in means {
            m.validate(16)
                .unwrap_or_else(|e| panic!("{}: {e}", m.label()));
        }
    }

    #[test]
    fn evaluation_checks_arguments() {
        let m = MeanFn::holder(2.0, 2).unwrap();
        assert_eq!(m.eval_scalar(&[1.0, 7.0]).unwrap(), 5.0);
        assert!(m.eval_scalar(&[1.0, 7.0, 2.0]).is_err());
        assert!(m.eval_scalar(&[1.0, -7.0]).is_err());
        assert!(m
            .eval(&vec![Point::new(vec![1.0, 2.0]).unwrap(); 2])
            .is_err());
        assert_eq!(m.eval_report(&sc(&[3.0, 3.0])).unwrap().iterations, 0);
    }

    #[test]
    fn rejects_non_means() {
        let r = MeanFn::scalar(2, Interval::real_line(), true, "sum", |x| {
            Ok(x.iter().sum())
        });
        assert!(matches!(r, Err(MeanError::NotAMean(_))));
        let r = MeanFn::scalar(2, Interval::real_line(), false, "first", |x| Ok(x[0]));
        assert!(r.is_ok());
    }

    #[test]
    fn symmetry_flags() {
        assert!(MeanFn::holder(1.0, 3).unwrap().symmetric());
        let w = vec![
            WeightFn::constant(2.0).unwrap(),
            WeightFn::constant(1.0).unwrap(),
        ];
        assert!(!MeanFn::weighted_arithmetic(w, 1).unwrap().symmetric());
    }
}
