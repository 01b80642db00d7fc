//! Deviation functions on intervals, the deviation-mean solver and the
//! closed forms of the classical families (Bajraktarević, Matkowski,
//! Hölder, Gini, weighted arithmetic) that serve as its oracles.

mod closed_form;
mod deviation;

pub use closed_form::{
    bajraktarevic_mean, gini_mean, holder_mean, weighted_arith_mean, weighted_arith_mean_points,
};
pub use deviation::{
    make_bajraktarevic_deviation, DeviationTuple, GeneratorFn, ScalarDeviation, WeightFn,
    DEFAULT_AXIOM_SAMPLES,
};

use crate::bisect::bisect_decreasing;
use crate::domain::{min_max, SolverConfig, SolverReport};
use crate::error::{MeanError, Result};

fn check_inputs(e: &DeviationTuple, x: &[f64]) -> Result<()> {
    if x.len() != e.len() {
        return Err(MeanError::arg(format!(
            "{} arguments for {} deviations",
            x.len(),
            e.len()
        )));
    }
    let dom = e.domain();
    if let Some(t) = x.iter().find(|t| !dom.contains(**t)) {
        return Err(MeanError::arg(format!("argument {t} outside {dom}")));
    }
    Ok(())
}

fn sum_unchecked(e: &DeviationTuple, x: &[f64], u: f64) -> f64 {
    e.iter().zip(x).map(|(ei, &xi)| ei.eval(xi, u)).sum()
}

/// `E_1(x_1, u) + ... + E_n(x_n, u)`.
pub fn e_sum(e: &DeviationTuple, x: &[f64], u: f64) -> Result<f64> {
    check_inputs(e, x)?;
    if !e.domain().contains(u) {
        return Err(MeanError::arg(format!("point {u} outside {}", e.domain())));
    }
    Ok(sum_unchecked(e, x, u))
}

/// The deviation mean: the unique root of `u -> e_sum(E, x, u)` in
/// `[min x, max x]`, located by bisection.
pub fn deviation_mean(
    e: &DeviationTuple,
    x: &[f64],
    cfg: &SolverConfig,
) -> Result<SolverReport<f64>> {
    cfg.validate()?;
    check_inputs(e, x)?;
    let (lo, hi) = min_max(x).expect("nonempty after check");
    let done = |value: f64, residual: f64, iterations: usize| SolverReport {
        value,
        residual,
        iterations,
        converged: true,
        trace: cfg.record_trace.then(Vec::new),
    };
    if lo == hi {
        return Ok(done(lo, 0.0, 0));
    }
    let (g_lo, g_hi) = (sum_unchecked(e, x, lo), sum_unchecked(e, x, hi));
    let invalid = |m: String| MeanError::InvalidDeviation(m);
    if !(g_lo.is_finite() && g_hi.is_finite()) {
        return Err(invalid(
            "deviation sum is not finite at the bracket ends".into(),
        ));
    }
    if g_lo < 0.0 || g_hi > 0.0 {
        return Err(invalid(format!(
            "deviation sum has the wrong sign at the bracket: {g_lo} at {lo}, {g_hi} at {hi}"
        )));
    }
    if g_lo == 0.0 {
        return Ok(done(lo, 0.0, 0));
    }
    if g_hi == 0.0 {
        return Ok(done(hi, 0.0, 0));
    }
    bisect_decreasing(
        |u| Ok(sum_unchecked(e, x, u)),
        lo,
        hi,
        g_lo,
        g_hi,
        cfg,
        cfg.abs_tol,
        true,
        &invalid,
    )
}

/// `sgn(e_sum(E, x, u))`, which equals `sgn(D^E(x) - u)`.
pub fn deviation_sign(e: &DeviationTuple, x: &[f64], u: f64) -> Result<i8> {
    let s = e_sum(e, x, u)?;
    Ok(if s > 0.0 {
        1
    } else if s < 0.0 {
        -1
    } else {
        0
    })
}

/// `(f_1 + ... + f_n)^{-1}(f_1(x_1) + ... + f_n(x_n))`, inverting the sum
/// of generators by bisection on `[min x, max x]`.
pub fn matkowski_mean(f: &[GeneratorFn], x: &[f64], cfg: &SolverConfig) -> Result<f64> {
    cfg.validate()?;
    if f.len() != x.len() || x.is_empty() {
        return Err(MeanError::arg("need one generator per argument"));
    }
    let dom = f[0].domain();
    if f.iter().any(|g| g.domain() != dom) {
        return Err(MeanError::arg("generators do not share a domain"));
    }
    if let Some(t) = x.iter().find(|t| !dom.contains(**t)) {
        return Err(MeanError::arg(format!("argument {t} outside {dom}")));
    }
    let target: f64 = f.iter().zip(x).map(|(g, &t)| g.eval(t)).sum();
    let (lo, hi) = min_max(x).unwrap();
    if lo == hi {
        return Ok(lo);
    }
    let gap = |u: f64| target - f.iter().map(|g| g.eval(u)).sum::<f64>();
    let (g_lo, g_hi) = (gap(lo), gap(hi));
    if g_lo <= 0.0 {
        return Ok(lo);
    }
    if g_hi >= 0.0 {
        return Ok(hi);
    }
    let rep = bisect_decreasing(|u| Ok(gap(u)), lo, hi, g_lo, g_hi, cfg, 0.0, true, &|m| {
        MeanError::arg(format!("sum of generators is not increasing: {m}"))
    })?;
    Ok(rep.into_result()?.value)
}
