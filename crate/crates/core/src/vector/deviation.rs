use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{Interval, Point};
use crate::error::{MeanError, Result};
use crate::scalar::{ScalarDeviation, WeightFn, DEFAULT_AXIOM_SAMPLES};

use super::Covector;

pub type VecFn2 = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;
pub type RealFn2 = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

const VALIDATION_SEED: u64 = 0x9e0_de71;

fn sample_point(domain: &Interval, dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| domain.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

/// A generalized deviation on the box `domain^dim`: `E(u, v)` is a covector
/// with `E(u, u) = 0` and `v -> -E(u, v)` strictly monotone.
#[derive(Clone)]
pub struct GenDeviation {
    dim: usize,
    domain: Interval,
    eval: VecFn2,
    label: String,
    // error estimate of eval at (u, v), when it is computed approximately
    noise: Option<RealFn2>,
}

impl fmt::Debug for GenDeviation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenDeviation")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("label", &self.label)
            .finish()
    }
}

impl GenDeviation {
    /// Wraps a callable and samples the axioms on `domain^dim`.
    pub fn new<F>(dim: usize, domain: Interval, label: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(MeanError::arg("dimension must be positive"));
        }
        let e = GenDeviation {
            dim,
            domain,
            eval: Arc::new(f),
            label: label.into(),
            noise: None,
        };
        e.check_axioms(DEFAULT_AXIOM_SAMPLES)?;
        Ok(e)
    }

    pub(crate) fn trusted(
        dim: usize,
        domain: Interval,
        label: impl Into<String>,
        eval: VecFn2,
    ) -> Self {
        GenDeviation {
            dim,
            domain,
            eval,
            label: label.into(),
            noise: None,
        }
    }

    /// `E(u, v) = 2 w(u) (u - v)`, the deviation of the potential `w(u) |v - u|^2`.
    pub fn inner_product(dim: usize, w: &WeightFn) -> Result<Self> {
        if dim == 0 {
            return Err(MeanError::arg("dimension must be positive"));
        }
        let we = w.clone();
        Ok(Self::trusted(
            dim,
            w.domain(),
            format!("inner-product(w={})", w.label()),
            Arc::new(move |u: &[f64], v: &[f64]| {
                let c = 2.0 * we.eval(u);
                u.iter().zip(v).map(|(a, b)| c * (a - b)).collect()
            }),
        ))
    }

    /// Coordinatewise deviation `E(u, v)_k = E_k(u_k, v_k)`.
    pub fn separable(parts: Vec<ScalarDeviation>) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| MeanError::arg("need at least one coordinate"))?;
        let mut domain = first.domain();
        for p in &parts[1..] {
            domain = domain
                .intersect(&p.domain())
                .ok_or_else(|| MeanError::arg("coordinate domains do not overlap"))?;
        }
        let label = format!(
            "separable({})",
            parts
                .iter()
                .map(|p| p.label())
                .collect::<Vec<_>>()
                .join(", ")
        );
        let fs: Vec<_> = parts.iter().map(|p| p.callable()).collect();
        Ok(Self::trusted(
            parts.len(),
            domain,
            label,
            Arc::new(move |u: &[f64], v: &[f64]| {
                fs.iter().enumerate().map(|(k, f)| f(u[k], v[k])).collect()
            }),
        ))
    }

    /// A scalar deviation viewed as a generalized one on `R^1`.
    pub fn from_scalar(e: &ScalarDeviation) -> Self {
        Self::separable(vec![e.clone()]).expect("one coordinate")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub(crate) fn noise_at(&self, u: &[f64], v: &[f64]) -> f64 {
        self.noise.as_ref().map_or(0.0, |n| n(u, v))
    }

    pub fn eval(&self, u: &Point, v: &Point) -> Covector {
        Covector::from_vec((self.eval)(u.coords(), v.coords()))
    }

    pub(crate) fn eval_raw(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        (self.eval)(u, v)
    }

    /// Samples `E(u, u) = 0`, strict monotonicity of `-E(u, .)` and
    /// `E(u, v)(u - v) > 0`.
    pub fn check_axioms(&self, samples: usize) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        let bad = |m: String| MeanError::InvalidDeviation(format!("{}: {m}", self.label));
        for _ in 0..samples {
            let u = sample_point(&self.domain, self.dim, &mut rng);
            let v = sample_point(&self.domain, self.dim, &mut rng);
            let w = sample_point(&self.domain, self.dim, &mut rng);
            let (euu, euv, euw) = (
                self.eval_raw(&u, &u),
                self.eval_raw(&u, &v),
                self.eval_raw(&u, &w),
            );
            for e in [&euu, &euv, &euw] {
                if e.len() != self.dim || e.iter().any(|c| !c.is_finite()) {
                    return Err(bad(format!(
                        "value at u = {u:?} is not a finite covector of length {}",
                        self.dim
                    )));
                }
            }
            if norm(&euu) > 1e-9 * (1.0 + norm(&euv) + norm(&euw)) {
                return Err(bad(format!("E(u, u) = {euu:?} at u = {u:?}")));
            }
            let dvw = diff(&v, &w);
            let mono = dot(&diff(&euv, &euw), &dvw);
            if mono >= 0.0 && norm(&dvw) > 1e-9 * (norm(&v) + norm(&w)) {
                return Err(bad(format!(
                    "-E(u, .) is not strictly monotone at u = {u:?}, v = {v:?}, w = {w:?}"
                )));
            }
            for (t, et) in [(&v, &euv), (&w, &euw)] {
                let d = diff(&u, t);
                if norm(&d) > 1e-9 * (norm(&u) + norm(t)) && dot(et, &d) <= 0.0 {
                    return Err(bad(format!("E(u, v)(u - v) <= 0 at u = {u:?}, v = {t:?}")));
                }
            }
        }
        Ok(())
    }
}

/// A potential `F(u, v)` with `v -> F(u, v)` strictly convex and smooth, and
/// `grad_v F(u, u) = 0`. Without a supplied gradient, a fourth-order central
/// difference is used.
#[derive(Clone)]
pub struct PotentialFn {
    dim: usize,
    domain: Interval,
    eval: RealFn2,
    grad: Option<VecFn2>,
    label: String,
}

impl fmt::Debug for PotentialFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialFn")
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("label", &self.label)
            .field("analytic_gradient", &self.grad.is_some())
            .finish()
    }
}

/// Tolerance for agreement between a supplied gradient and finite differences.
pub const GRADIENT_CHECK_TOL: f64 = 1e-6;

impl PotentialFn {
    pub fn new<F>(
        dim: usize,
        domain: Interval,
        label: impl Into<String>,
        f: F,
        grad: Option<VecFn2>,
    ) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(MeanError::arg("dimension must be positive"));
        }
        let p = PotentialFn {
            dim,
            domain,
            eval: Arc::new(f),
            grad,
            label: label.into(),
        };
        p.check(DEFAULT_AXIOM_SAMPLES)?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn eval(&self, u: &Point, v: &Point) -> f64 {
        (self.eval)(u.coords(), v.coords())
    }

    pub fn grad_v(&self, u: &Point, v: &Point) -> Covector {
        Covector::from_vec(self.grad_raw(u.coords(), v.coords()))
    }

    pub(crate) fn eval_raw(&self, u: &[f64], v: &[f64]) -> f64 {
        (self.eval)(u, v)
    }

    pub(crate) fn grad_raw(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        match &self.grad {
            Some(g) => g(u, v),
            None => self.fd_grad(u, v),
        }
    }

    /// Five-point central differences.
    pub fn fd_grad(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        self.fd_grad_step(u, v, 1e-3)
    }

    /// Error estimate of [`fd_grad`](Self::fd_grad) from halving the step.
    pub(crate) fn fd_error(&self, u: &[f64], v: &[f64]) -> f64 {
        if self.grad.is_some() {
            return 0.0;
        }
        norm(&diff(&self.fd_grad(u, v), &self.fd_grad_step(u, v, 5e-4)))
    }

    fn fd_grad_step(&self, u: &[f64], v: &[f64], step: f64) -> Vec<f64> {
        let mut w = v.to_vec();
        (0..v.len())
            .map(|k| {
                let h = step * (1.0 + v[k].abs());
                let mut at = |s: f64| {
                    w[k] = v[k] + s * h;
                    let r = (self.eval)(u, &w);
                    w[k] = v[k];
                    r
                };
                let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
                (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)
            })
            .collect()
    }

    /// Samples property (F) and, for a supplied gradient, its agreement
    /// with finite differences.
    pub fn check(&self, samples: usize) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        let bad = |m: String| MeanError::InvalidPotential(format!("{}: {m}", self.label));
        for _ in 0..samples {
            let u = sample_point(&self.domain, self.dim, &mut rng);
            let v = sample_point(&self.domain, self.dim, &mut rng);
            let w = sample_point(&self.domain, self.dim, &mut rng);
            let (fv, fw) = (self.eval_raw(&u, &v), self.eval_raw(&u, &w));
            let mid: Vec<f64> = v.iter().zip(&w).map(|(a, b)| 0.5 * (a + b)).collect();
            let fm = self.eval_raw(&u, &mid);
            if !(fv.is_finite() && fw.is_finite() && fm.is_finite()) {
                return Err(bad(format!("non-finite value near u = {u:?}")));
            }
            let apart = norm(&diff(&v, &w)) > 1e-9 * (norm(&v) + norm(&w));
            if apart && fm >= 0.5 * (fv + fw) {
                return Err(bad(format!("not strictly convex between {v:?} and {w:?}")));
            }
            let g0 = self.grad_raw(&u, &u);
            let gv = self.grad_raw(&u, &v);
            if g0.len() != self.dim || gv.len() != self.dim || gv.iter().any(|c| !c.is_finite()) {
                return Err(bad(format!(
                    "gradient at u = {u:?} is not a finite covector of length {}",
                    self.dim
                )));
            }
            if norm(&g0) > 1e-7 * (1.0 + norm(&gv)) {
                return Err(bad(format!("gradient at v = u is {g0:?}, not 0")));
            }
            if self.grad.is_some() {
                let fd = self.fd_grad(&u, &v);
                let err = norm(&diff(&fd, &gv));
                // the spread between two step sizes bounds the stencil's own error
                let fd_err = norm(&diff(&fd, &self.fd_grad_step(&u, &v, 5e-4)));
                if err > GRADIENT_CHECK_TOL * (1.0 + norm(&gv)) + 4.0 * fd_err {
                    return Err(bad(format!(
                        "gradient {gv:?} disagrees with finite differences {fd:?} at u = {u:?}, v = {v:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `w(u) |v - u|^2` with gradient `2 w(u) (v - u)`.
pub fn make_norm_sq_potential(dim: usize, w: &WeightFn) -> Result<PotentialFn> {
    if dim == 0 {
        return Err(MeanError::arg("dimension must be positive"));
    }
    let (we, wg) = (w.clone(), w.clone());
    Ok(PotentialFn {
        dim,
        domain: w.domain(),
        eval: Arc::new(move |u: &[f64], v: &[f64]| {
            we.eval(u) * u.iter().zip(v).map(|(a, b)| (b - a) * (b - a)).sum::<f64>()
        }),
        grad: Some(Arc::new(move |u: &[f64], v: &[f64]| {
            let c = 2.0 * wg.eval(u);
            u.iter().zip(v).map(|(a, b)| c * (b - a)).collect()
        })),
        label: format!("norm-squared(w={})", w.label()),
    })
}

/// `E_F(u, v) = -grad_v F(u, v)`, with the deviation axioms re-sampled.
pub fn make_potential_deviation(f: &PotentialFn) -> Result<GenDeviation> {
    let p = f.clone();
    let mut e = GenDeviation::trusted(
        f.dim,
        f.domain,
        format!("-grad {}", f.label),
        Arc::new(move |u: &[f64], v: &[f64]| p.grad_raw(u, v).into_iter().map(|c| -c).collect()),
    );
    if f.grad.is_none() {
        let q = f.clone();
        e.noise = Some(Arc::new(move |u: &[f64], v: &[f64]| q.fd_error(u, v)));
    }
    e.check_axioms(DEFAULT_AXIOM_SAMPLES)
        .map_err(|err| match err {
            MeanError::InvalidDeviation(m) => MeanError::InvalidPotential(m),
            other => other,
        })?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn one() -> WeightFn {
        WeightFn::constant(1.0).unwrap()
    }

    #[test]
    fn inner_product_and_potential_deviation_agree() {
        let f = make_norm_sq_potential(2, &one()).unwrap();
        let e = make_potential_deviation(&f).unwrap();
        let ip = GenDeviation::inner_product(2, &one()).unwrap();
        let (u, v) = (pt(&[1.0, -2.0]), pt(&[0.5, 3.0]));
        assert_eq!(e.eval(&u, &v).grad(), ip.eval(&u, &v).grad());
        assert_eq!(ip.eval(&u, &v).grad(), &[1.0, -10.0]);
        assert_eq!(e.eval(&u, &u).grad(), &[0.0, 0.0]);
    }

    #[test]
    fn potential_deviation_in_one_dimension() {
        let f = PotentialFn::new(
            1,
            Interval::real_line(),
            "(v-u)^2",
            |u, v| (v[0] - u[0]).powi(2),
            None,
        )
        .unwrap();
        let e = make_potential_deviation(&f).unwrap();
        let c = e.eval(&pt(&[1.0]), &pt(&[3.0]));
        assert!((c.grad()[0] + 4.0).abs() < 1e-9, "{c:?}");
    }

    #[test]
    fn norm_sq_values() {
        let f = make_norm_sq_potential(2, &one()).unwrap();
        assert_eq!(f.eval(&pt(&[0.0, 0.0]), &pt(&[3.0, 4.0])), 25.0);
        assert_eq!(f.eval(&pt(&[1.5, 2.0]), &pt(&[1.5, 2.0])), 0.0);
        let f = make_norm_sq_potential(1, &WeightFn::constant(2.0).unwrap()).unwrap();
        assert_eq!(f.eval(&pt(&[1.0]), &pt(&[4.0])), 18.0);
        f.check(256).unwrap();
    }

    #[test]
    fn rejects_non_monotone_deviation() {
        let r = GenDeviation::new(2, Interval::real_line(), "rot", |u, v| {
            vec![v[1] - u[1], u[0] - v[0]]
        });
        assert!(matches!(r, Err(MeanError::InvalidDeviation(_))));
        let r = GenDeviation::new(1, Interval::real_line(), "wrong-sign", |u, v| {
            vec![v[0] - u[0]]
        });
        assert!(matches!(r, Err(MeanError::InvalidDeviation(_))));
    }

    #[test]
    fn rejects_bad_potentials() {
        let concave = PotentialFn::new(
            1,
            Interval::real_line(),
            "-(v-u)^2",
            |u, v| -(v[0] - u[0]).powi(2),
            None,
        );
        assert!(matches!(concave, Err(MeanError::InvalidPotential(_))));
        let wrong_grad: VecFn2 = Arc::new(|u: &[f64], v: &[f64]| vec![3.0 * (v[0] - u[0])]);
        let r = PotentialFn::new(
            1,
            Interval::real_line(),
            "(v-u)^2",
            |u, v| (v[0] - u[0]).powi(2),
            Some(wrong_grad),
        );
        assert!(matches!(r, Err(MeanError::InvalidPotential(_))));
        let shifted = PotentialFn::new(
            1,
            Interval::real_line(),
            "(v-u-1)^2",
            |u, v| (v[0] - u[0] - 1.0).powi(2),
            None,
        );
        assert!(matches!(shifted, Err(MeanError::InvalidPotential(_))));
    }

    #[test]
    fn separable_deviation_passes_axioms() {
        let e = GenDeviation::separable(vec![
            ScalarDeviation::holder(2.0).unwrap(),
            ScalarDeviation::gini(1.0, 0.5).unwrap(),
            ScalarDeviation::holder(-1.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(e.dim(), 3);
        assert_eq!(e.domain(), Interval::positive());
        e.check_axioms(512).unwrap();
    }

    #[test]
    fn fd_gradient_is_accurate() {
        let f = PotentialFn::new(
            2,
            Interval::positive(),
            "smooth",
            |u, v| {
                (v[0] / u[0]).powi(2) - 2.0 * v[0] / u[0]
                    + (v[1] - u[1]).powi(4)
                    + (v[1] - u[1]).powi(2)
            },
            None,
        )
        .unwrap();
        let g = f.grad_v(&pt(&[2.0, 1.0]), &pt(&[3.0, 1.5]));
        // d/dv0 = 2 v0/u0^2 - 2/u0, d/dv1 = 4 (v1-u1)^3 + 2 (v1-u1)
        assert!((g.grad()[0] - 0.5).abs() < 1e-10);
        assert!((g.grad()[1] - 1.5).abs() < 1e-10);
    }
}
