use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{Injection, Interval};
use crate::error::{MeanError, Result};

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type FnSlice = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Number of random triples drawn when validating a callable.
pub const DEFAULT_AXIOM_SAMPLES: usize = 64;

const VALIDATION_SEED: u64 = 0x5eed_0fd3;

/// A deviation function `E(u, v)` on an interval: `E(u, u) = 0` and
/// `v -> E(u, v)` continuous and strictly decreasing.
///
/// Both axioms are checked on random samples when the value is built; they
/// cannot be proven for an arbitrary callable.
#[derive(Clone)]
pub struct ScalarDeviation {
    domain: Interval,
    eval: Fn2,
    label: String,
}

impl fmt::Debug for ScalarDeviation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarDeviation")
            .field("domain", &self.domain)
            .field("label", &self.label)
            .finish()
    }
}

impl ScalarDeviation {
    pub fn new<F>(domain: Interval, label: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self::with_samples(domain, label, f, DEFAULT_AXIOM_SAMPLES)
    }

    pub fn with_samples<F>(
        domain: Interval,
        label: impl Into<String>,
        f: F,
        samples: usize,
    ) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        let dev = ScalarDeviation {
            domain,
            eval: Arc::new(f),
            label: label.into(),
        };
        dev.check_axioms(samples)?;
        Ok(dev)
    }

    /// Wraps a callable that is a deviation by construction.
    pub(crate) fn trusted(domain: Interval, label: impl Into<String>, eval: Fn2) -> Self {
        ScalarDeviation {
            domain,
            eval,
            label: label.into(),
        }
    }

    /// `E(u, v) = u - v` on the real line.
    pub fn arithmetic() -> Self {
        Self::trusted(Interval::real_line(), "arithmetic", Arc::new(|u, v| u - v))
    }

    /// The deviation generating the power mean of exponent `p` on `]0, inf[`:
    /// `sgn(p) (u^p - v^p)`, and `ln u - ln v` for `p = 0`.
    pub fn holder(p: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(MeanError::arg("Hölder exponent must be finite"));
        }
        let eval: Fn2 = if p == 0.0 {
            Arc::new(|u: f64, v: f64| u.ln() - v.ln())
        } else {
            let s = p.signum();
            Arc::new(move |u: f64, v: f64| s * (u.powf(p) - v.powf(p)))
        };
        Ok(Self::trusted(
            Interval::positive(),
            format!("holder(p={p})"),
            eval,
        ))
    }

    /// The deviation generating the Gini mean `G_{p,q}` on `]0, inf[`:
    /// `u^q sgn(p-q) (u^{p-q} - v^{p-q})`, and `u^p (ln u - ln v)` for `p = q`.
    pub fn gini(p: f64, q: f64) -> Result<Self> {
        if !p.is_finite() || !q.is_finite() {
            return Err(MeanError::arg("Gini exponents must be finite"));
        }
        let r = p - q;
        let eval: Fn2 = if r == 0.0 {
            Arc::new(move |u: f64, v: f64| u.powf(p) * (u.ln() - v.ln()))
        } else {
            let s = r.signum();
            Arc::new(move |u: f64, v: f64| s * u.powf(q) * (u.powf(r) - v.powf(r)))
        };
        Ok(Self::trusted(
            Interval::positive(),
            format!("gini(p={p},q={q})"),
            eval,
        ))
    }

    /// `E(u, v) = f(u) - f(v)`, the deviation of the quasi-arithmetic mean of `f`.
    pub fn quasi_arithmetic(f: &GeneratorFn) -> Self {
        make_bajraktarevic_deviation(f, &WeightFn::unit(f.domain())).expect("same domain")
    }

    pub fn eval(&self, u: f64, v: f64) -> f64 {
        (self.eval)(u, v)
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub(crate) fn callable(&self) -> Fn2 {
        self.eval.clone()
    }

    /// Samples (E1), (E2) and the sign property.
    pub fn check_axioms(&self, samples: usize) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        let bad = |msg: String| MeanError::InvalidDeviation(format!("{}: {msg}", self.label));
        for _ in 0..samples {
            let u = self.domain.sample(&mut rng);
            let v = self.domain.sample(&mut rng);
            let w = self.domain.sample(&mut rng);
            let (euu, euv, euw) = (self.eval(u, u), self.eval(u, v), self.eval(u, w));
            if !(euu.is_finite() && euv.is_finite() && euw.is_finite()) {
                return Err(bad(format!("non-finite value near u = {u}")));
            }
            if euu.abs() > 1e-9 * (1.0 + euv.abs() + euw.abs()) {
                return Err(bad(format!("E(u, u) = {euu} at u = {u}")));
            }
            let (a, b, ea, eb) = if v < w {
                (v, w, euv, euw)
            } else {
                (w, v, euw, euv)
            };
            let separated = (b - a) > 1e-9 * (a.abs() + b.abs());
            if ea < eb || (separated && ea == eb) {
                return Err(bad(format!(
                    "v -> E(u, v) not strictly decreasing at u = {u}: E(u, {a}) = {ea}, E(u, {b}) = {eb}"
                )));
            }
            for (t, et) in [(v, euv), (w, euw)] {
                let apart = (u - t).abs() > 1e-9 * (u.abs() + t.abs());
                if apart && et.signum() != (u - t).signum() {
                    return Err(bad(format!("sign property fails: E({u}, {t}) = {et}")));
                }
            }
        }
        Ok(())
    }
}

/// Positive weight function. It receives the coordinates of its argument,
/// so the same type serves scalar arguments (one coordinate) and points.
#[derive(Clone)]
pub struct WeightFn {
    domain: Interval,
    eval: FnSlice,
    label: String,
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFn")
            .field("label", &self.label)
            .finish()
    }
}

impl WeightFn {
    /// Weight over scalars; positivity is sampled on `domain`.
    pub fn new<F>(domain: Interval, label: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::over_points(domain, 1, label, move |c: &[f64]| f(c[0]))
    }

    /// Weight over points of `R^dim`, each coordinate drawn from `domain`
    /// when sampling positivity.
    pub fn over_points<F>(
        domain: Interval,
        dim: usize,
        label: impl Into<String>,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let w = WeightFn {
            domain,
            eval: Arc::new(f),
            label: label.into(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        for _ in 0..DEFAULT_AXIOM_SAMPLES {
            let u: Vec<f64> = (0..dim.max(1)).map(|_| domain.sample(&mut rng)).collect();
            let val = w.eval(&u);
            if !(val > 0.0 && val.is_finite()) {
                return Err(MeanError::arg(format!(
                    "weight {} is {val} at {u:?}",
                    w.label
                )));
            }
        }
        Ok(w)
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(MeanError::arg(format!(
                "constant weight {c} is not positive"
            )));
        }
        Ok(WeightFn {
            domain: Interval::real_line(),
            eval: Arc::new(move |_| c),
            label: format!("{c}"),
        })
    }

    fn unit(domain: Interval) -> Self {
        WeightFn {
            domain,
            eval: Arc::new(|_| 1.0),
            label: "1".into(),
        }
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        (self.eval)(u)
    }

    pub fn eval_scalar(&self, u: f64) -> f64 {
        (self.eval)(&[u])
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Strictly increasing continuous generator with its inverse.
#[derive(Clone)]
pub struct GeneratorFn {
    domain: Interval,
    eval: Fn1,
    inverse: Fn1,
    label: String,
}

impl fmt::Debug for GeneratorFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorFn")
            .field("domain", &self.domain)
            .field("label", &self.label)
            .finish()
    }
}

impl GeneratorFn {
    pub fn new<F, G>(domain: Interval, label: impl Into<String>, f: F, inverse: G) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let g = GeneratorFn {
            domain,
            eval: Arc::new(f),
            inverse: Arc::new(inverse),
            label: label.into(),
        };
        g.check(DEFAULT_AXIOM_SAMPLES)?;
        Ok(g)
    }

    fn trusted(domain: Interval, label: impl Into<String>, eval: Fn1, inverse: Fn1) -> Self {
        GeneratorFn {
            domain,
            eval,
            inverse,
            label: label.into(),
        }
    }

    pub fn identity() -> Self {
        Self::trusted(
            Interval::real_line(),
            "id",
            Arc::new(|u| u),
            Arc::new(|t| t),
        )
    }

    pub fn log() -> Self {
        Self::trusted(
            Interval::positive(),
            "log",
            Arc::new(f64::ln),
            Arc::new(f64::exp),
        )
    }

    pub fn exp() -> Self {
        Self::trusted(
            Interval::real_line(),
            "exp",
            Arc::new(f64::exp),
            Arc::new(f64::ln),
        )
    }

    /// `sgn(p) u^p` on `]0, inf[`, and `ln` for `p = 0`.
    pub fn power(p: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(MeanError::arg("power exponent must be finite"));
        }
        if p == 0.0 {
            return Ok(Self::log());
        }
        let s = p.signum();
        Ok(Self::trusted(
            Interval::positive(),
            format!("pow{p}"),
            Arc::new(move |u: f64| s * u.powf(p)),
            Arc::new(move |t: f64| (s * t).powf(1.0 / p)),
        ))
    }

    /// `a f + b` with `a > 0`.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(MeanError::arg("affine generator needs a > 0 and finite b"));
        }
        let (f, inv) = (self.eval.clone(), self.inverse.clone());
        Ok(Self::trusted(
            self.domain,
            format!("{a}*{}+{b}", self.label),
            Arc::new(move |u| a * f(u) + b),
            Arc::new(move |t| inv((t - b) / a)),
        ))
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.eval)(u)
    }

    pub fn inverse(&self, t: f64) -> f64 {
        (self.inverse)(t)
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn check(&self, samples: usize) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_SEED);
        for _ in 0..samples {
            let a = self.domain.sample(&mut rng);
            let b = self.domain.sample(&mut rng);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let (flo, fhi) = (self.eval(lo), self.eval(hi));
            if !(flo.is_finite() && fhi.is_finite())
                || flo > fhi
                || (lo < hi && flo == fhi && hi - lo > 1e-9)
            {
                return Err(MeanError::arg(format!(
                    "generator {} is not strictly increasing near {lo}",
                    self.label
                )));
            }
            let back = self.inverse(flo);
            if (back - lo).abs() > 1e-10 * (1.0 + lo.abs()) {
                return Err(MeanError::arg(format!(
                    "inverse of generator {} is inconsistent: f^-1(f({lo})) = {back}",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

/// `E_{f,w}(u, v) = w(u) (f(u) - f(v))`, living on the common domain of `f` and `w`.
pub fn make_bajraktarevic_deviation(f: &GeneratorFn, w: &WeightFn) -> Result<ScalarDeviation> {
    let domain = f
        .domain
        .intersect(&w.domain)
        .ok_or_else(|| MeanError::arg("generator and weight domains do not overlap"))?;
    let (fe, we) = (f.eval.clone(), w.eval.clone());
    Ok(ScalarDeviation::trusted(
        domain,
        format!("bajraktarevic(f={}, w={})", f.label, w.label),
        Arc::new(move |u, v| we(&[u]) * (fe(u) - fe(v))),
    ))
}

/// `(E_1, ..., E_n)` restricted to the intersection of their domains.
#[derive(Debug, Clone)]
pub struct DeviationTuple {
    deviations: Vec<ScalarDeviation>,
    common_domain: Interval,
}

impl DeviationTuple {
    pub fn new(deviations: Vec<ScalarDeviation>) -> Result<Self> {
        let first = deviations
            .first()
            .ok_or_else(|| MeanError::arg("deviation tuple must be nonempty"))?;
        let mut common_domain = first.domain;
        for d in &deviations[1..] {
            common_domain = common_domain
                .intersect(&d.domain)
                .ok_or_else(|| MeanError::arg("deviation domains do not overlap"))?;
        }
        Ok(DeviationTuple {
            deviations,
            common_domain,
        })
    }

    /// `n` copies of one deviation.
    pub fn repeat(dev: ScalarDeviation, n: usize) -> Result<Self> {
        Self::new(vec![dev; n])
    }

    pub fn len(&self) -> usize {
        self.deviations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deviations.is_empty()
    }

    pub fn get(&self, i: usize) -> &ScalarDeviation {
        &self.deviations[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &ScalarDeviation> {
        self.deviations.iter()
    }

    pub fn domain(&self) -> Interval {
        self.common_domain
    }

    /// `E_chi = (E_{chi(1)}, ..., E_{chi(k)})`.
    pub fn select(&self, chi: &Injection) -> Result<Self> {
        Self::new(crate::domain::select(&self.deviations, chi)?)
    }
}
