use crate::domain::{common_dim, min_max, Point};
use crate::error::{MeanError, Result};

use super::deviation::{GeneratorFn, WeightFn};

fn require_positive(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(MeanError::arg("empty tuple"));
    }
    match x.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        Some(t) => Err(MeanError::arg(format!(
            "argument {t} is not a positive number"
        ))),
        None => Ok(()),
    }
}

fn weight_at(w: &WeightFn, u: &[f64]) -> Result<f64> {
    let v = w.eval(u);
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(MeanError::arg(format!(
            "weight {} evaluates to {v} at {u:?}",
            w.label()
        )))
    }
}

/// `f^{-1}(sum w_i(x_i) f(x_i) / sum w_i(x_i))`.
pub fn bajraktarevic_mean(f: &GeneratorFn, w: &[WeightFn], x: &[f64]) -> Result<f64> {
    if w.len() != x.len() || x.is_empty() {
        return Err(MeanError::arg("need one weight per argument"));
    }
    let dom = f.domain();
    if let Some(t) = x.iter().find(|t| !dom.contains(**t)) {
        return Err(MeanError::arg(format!("argument {t} outside {dom}")));
    }
    let (mut num, mut den) = (0.0, 0.0);
    let mut fx = Vec::with_capacity(x.len());
    for (wi, &xi) in w.iter().zip(x) {
        let a = weight_at(wi, &[xi])?;
        let v = f.eval(xi);
        num += a * v;
        den += a;
        fx.push(v);
    }
    // rounding can push the ratio just outside the range of f on [min x, max x]
    let (flo, fhi) = min_max(&fx).unwrap();
    let t = (num / den).clamp(flo, fhi);
    let y = f.inverse(t);
    if !y.is_finite() {
        return Err(MeanError::Domain(format!("f^-1({t}) is not finite")));
    }
    let (lo, hi) = min_max(x).unwrap();
    Ok(y.clamp(lo, hi))
}

/// Power mean `((x_1^p + ... + x_n^p) / n)^{1/p}`; geometric mean at `p = 0`.
pub fn holder_mean(p: f64, x: &[f64]) -> Result<f64> {
    require_positive(x)?;
    if !p.is_finite() {
        return Err(MeanError::arg("exponent must be finite"));
    }
    let n = x.len() as f64;
    if p == 0.0 {
        return Ok((x.iter().map(|t| t.ln()).sum::<f64>() / n).exp());
    }
    // scale by the extreme value that keeps every ratio^p <= 1
    let (lo, hi) = min_max(x).unwrap();
    let s = if p > 0.0 { hi } else { lo };
    let avg = x.iter().map(|t| (t / s).powf(p)).sum::<f64>() / n;
    Ok(s * avg.powf(1.0 / p))
}

/// Gini mean `(sum x^p / sum x^q)^{1/(p-q)}`, with
/// `exp(sum x^p ln x / sum x^p)` on the diagonal `p = q`.
pub fn gini_mean(p: f64, q: f64, x: &[f64]) -> Result<f64> {
    require_positive(x)?;
    if !p.is_finite() || !q.is_finite() {
        return Err(MeanError::arg("exponents must be finite"));
    }
    let (_, s) = min_max(x).unwrap();
    let r: Vec<f64> = x.iter().map(|t| t / s).collect();
    if p == q {
        let wts: Vec<f64> = r.iter().map(|t| t.powf(p)).collect();
        let den: f64 = wts.iter().sum();
        let num: f64 = wts.iter().zip(&r).map(|(w, t)| w * t.ln()).sum();
        return Ok(s * (num / den).exp());
    }
    let sp: f64 = r.iter().map(|t| t.powf(p)).sum();
    let sq: f64 = r.iter().map(|t| t.powf(q)).sum();
    Ok(s * (sp / sq).powf(1.0 / (p - q)))
}

/// `sum w_i(x_i) x_i / sum w_i(x_i)` for scalar arguments.
pub fn weighted_arith_mean(w: &[WeightFn], x: &[f64]) -> Result<f64> {
    if w.len() != x.len() || x.is_empty() {
        return Err(MeanError::arg("need one weight per argument"));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (wi, &xi) in w.iter().zip(x) {
        let a = weight_at(wi, &[xi])?;
        num += a * xi;
        den += a;
    }
    let (lo, hi) = min_max(x).unwrap();
    Ok((num / den).clamp(lo, hi))
}

/// Coordinatewise version of [`weighted_arith_mean`] for points.
pub fn weighted_arith_mean_points(w: &[WeightFn], x: &[Point]) -> Result<Point> {
    if w.len() != x.len() {
        return Err(MeanError::arg("need one weight per argument"));
    }
    let d = common_dim(x)?;
    let mut num = vec![0.0; d];
    let mut den = 0.0;
    for (wi, xi) in w.iter().zip(x) {
        let a = weight_at(wi, xi.coords())?;
        for (acc, c) in num.iter_mut().zip(xi.coords()) {
            *acc += a * c;
        }
        den += a;
    }
    Point::new(num.into_iter().map(|v| v / den).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Interval;

    fn ones(n: usize) -> Vec<WeightFn> {
        vec![WeightFn::constant(1.0).unwrap(); n]
    }

    #[test]
    fn bajraktarevic_examples() {
        let id = GeneratorFn::identity();
        assert_eq!(
            bajraktarevic_mean(&id, &ones(3), &[1.0, 2.0, 3.0]).unwrap(),
            2.0
        );
        let w = WeightFn::new(Interval::positive(), "u", |u| u).unwrap();
        assert_eq!(
            bajraktarevic_mean(&id, &[w.clone(), w], &[1.0, 3.0]).unwrap(),
            2.5
        );
        let w = [
            WeightFn::constant(2.0).unwrap(),
            WeightFn::constant(1.0).unwrap(),
        ];
        assert_eq!(bajraktarevic_mean(&id, &w, &[0.0, 3.0]).unwrap(), 1.0);
    }

    #[test]
    fn holder_examples() {
        assert_eq!(holder_mean(1.0, &[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert!((holder_mean(2.0, &[1.0, 7.0]).unwrap() - 5.0).abs() < 1e-14);
        assert!((holder_mean(0.0, &[2.0, 8.0]).unwrap() - 4.0).abs() < 1e-14);
        assert!(holder_mean(1.0, &[1.0, -1.0]).is_err());
        assert!(holder_mean(1.0, &[0.0, 1.0]).is_err());
        // no overflow for large exponents
        let big = holder_mean(400.0, &[10.0, 20.0]).unwrap();
        assert!(big.is_finite() && big > 19.0 && big <= 20.0);
    }

    #[test]
    fn gini_examples() {
        assert!((gini_mean(1.0, 0.0, &[1.0, 2.0, 3.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!((gini_mean(2.0, 1.0, &[1.0, 3.0]).unwrap() - 2.5).abs() < 1e-15);
        assert_eq!(gini_mean(0.0, -1.0, &[2.0, 2.0]).unwrap(), 2.0);
        // diagonal case against the p -> q limit
        let x = [0.7, 1.9, 4.2];
        let diag = gini_mean(1.5, 1.5, &x).unwrap();
        let near = gini_mean(1.5 + 1e-7, 1.5, &x).unwrap();
        assert!((diag - near).abs() < 1e-6);
    }

    #[test]
    fn weighted_arith_examples() {
        assert_eq!(
            weighted_arith_mean(&ones(3), &[1.0, 2.0, 3.0]).unwrap(),
            2.0
        );
        let w = [
            WeightFn::constant(3.0).unwrap(),
            WeightFn::constant(1.0).unwrap(),
        ];
        let x = [
            Point::new(vec![0.0, 0.0]).unwrap(),
            Point::new(vec![4.0, 4.0]).unwrap(),
        ];
        assert_eq!(
            weighted_arith_mean_points(&w, &x).unwrap().coords(),
            &[1.0, 1.0]
        );
        let w = WeightFn::new(Interval::positive(), "u", |u| u).unwrap();
        assert_eq!(
            weighted_arith_mean(&[w.clone(), w], &[1.0, 3.0]).unwrap(),
            2.5
        );
    }

    #[test]
    fn reflexive_on_constant_tuples() {
        for u in [0.3, 1.0, 7.25, 1e3] {
            let x = [u; 5];
            assert!((holder_mean(-2.5, &x).unwrap() - u).abs() <= 1e-12 * u);
            assert!((holder_mean(0.0, &x).unwrap() - u).abs() <= 1e-12 * u);
            assert!((gini_mean(3.0, -1.0, &x).unwrap() - u).abs() <= 1e-12 * u);
            assert!((gini_mean(2.0, 2.0, &x).unwrap() - u).abs() <= 1e-12 * u);
        }
    }
}
