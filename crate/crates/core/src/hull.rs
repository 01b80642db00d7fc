//! Euclidean projection onto the convex hull of finitely many points.
//!
//! Uses Wolfe's minimum-norm-point algorithm on the shifted points
//! `x_j - z`. It terminates finitely, tolerates repeated and affinely
//! dependent generators, and returns barycentric weights along with the
//! projected point.

use nalgebra::{DMatrix, DVector};

use crate::domain::{common_dim, hull_combination, Barycentric, Point};
use crate::error::{MeanError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HullProjection {
    pub point: Point,
    pub weights: Barycentric,
    pub distance: f64,
}

const GAP_TOL: f64 = 1e-15;
const WEIGHT_TOL: f64 = 1e-15;

/// Projects `z` onto `conv{x_1, ..., x_n}`.
pub fn project(x: &[Point], z: &[f64]) -> Result<HullProjection> {
    let d = common_dim(x)?;
    if z.len() != d {
        return Err(MeanError::arg("projected point has the wrong dimension"));
    }
    let n = x.len();
    let p: Vec<Vec<f64>> = x
        .iter()
        .map(|xi| xi.coords().iter().zip(z).map(|(a, b)| a - b).collect())
        .collect();
    let sq: Vec<f64> = p.iter().map(|v| dot(v, v)).collect();
    let scale = sq.iter().cloned().fold(0.0, f64::max);

    let mut lambda = vec![0.0; n];
    if n == 1 || scale == 0.0 {
        lambda[0] = 1.0;
        return finish(x, z, lambda);
    }

    let start = argmin(&sq);
    let mut corral = vec![start];
    let mut w = vec![1.0];
    let mut cur = p[start].clone();

    for _ in 0..(64 * n + 128) {
        let dots: Vec<f64> = p.iter().map(|v| dot(v, &cur)).collect();
        let j = argmin(&dots);
        // relative to the current distance, so that short steps off a face
        // are resolved as accurately as long ones
        let cn = dot(&cur, &cur);
        let inside = cn.sqrt() <= 16.0 * f64::EPSILON * scale.sqrt();
        if inside || cn - dots[j] <= GAP_TOL * scale.sqrt() * cn.sqrt() || corral.contains(&j) {
            break;
        }
        corral.push(j);
        w.push(0.0);

        for _ in 0..=corral.len() {
            let alpha = affine_min(&p, &corral);
            if alpha.iter().all(|&a| a > WEIGHT_TOL) {
                w = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (wi, ai) in w.iter().zip(&alpha) {
                if *ai <= WEIGHT_TOL && wi - ai > 0.0 {
                    theta = theta.min(wi / (wi - ai));
                }
            }
            for (wi, ai) in w.iter_mut().zip(&alpha) {
                *wi = theta * ai + (1.0 - theta) * *wi;
            }
            let keep: Vec<bool> = w.iter().map(|&wi| wi > WEIGHT_TOL).collect();
            if keep.iter().all(|k| !k) {
                // cannot happen in exact arithmetic; keep the heaviest entry
                let best = argmax(&w);
                corral = vec![corral[best]];
                w = vec![1.0];
                break;
            }
            let mut ki = keep.iter();
            corral.retain(|_| *ki.next().unwrap());
            let mut ki = keep.iter();
            w.retain(|_| *ki.next().unwrap());
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|wi| *wi /= s);
        }

        cur = vec![0.0; d];
        for (&i, &wi) in corral.iter().zip(&w) {
            for (c, v) in cur.iter_mut().zip(&p[i]) {
                *c += wi * v;
            }
        }
    }

    for (&i, &wi) in corral.iter().zip(&w) {
        lambda[i] += wi;
    }
    finish(x, z, lambda)
}

fn finish(x: &[Point], z: &[f64], lambda: Vec<f64>) -> Result<HullProjection> {
    let weights = Barycentric::renormalized(&lambda)?;
    let point = hull_combination(x, &weights)?;
    let distance = point
        .coords()
        .iter()
        .zip(z)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(HullProjection {
        point,
        weights,
        distance,
    })
}

/// Distance from `z` to `conv(x)`.
pub fn distance(x: &[Point], z: &[f64]) -> Result<f64> {
    Ok(project(x, z)?.distance)
}

/// Affine minimizer of `|sum alpha_i p_i|` over the corral, `sum alpha_i = 1`.
fn affine_min(p: &[Vec<f64>], corral: &[usize]) -> Vec<f64> {
    let m = corral.len();
    if m == 1 {
        return vec![1.0];
    }
    let base = &p[corral[0]];
    let d = base.len();
    let q = DMatrix::from_fn(d, m - 1, |r, c| p[corral[c + 1]][r] - base[r]);
    let gram = q.transpose() * &q;
    let rhs = -(q.transpose() * DVector::from_column_slice(base));
    let beta = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .unwrap_or_else(|_| DVector::zeros(m - 1)),
    };
    let mut alpha = Vec::with_capacity(m);
    alpha.push(1.0 - beta.sum());
    alpha.extend(beta.iter());
    alpha
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}
