use crate::domain::{SolverConfig, SolverReport};
use crate::error::{MeanError, Result};

/// Bisection for a function with `g(lo) >= 0 >= g(hi)`.
///
/// Stops when `|g(mid)| <= residual_tol` or the bracket is narrower than
/// `abs_tol + rel_tol * |root|`. With `monotone` set, a midpoint value
/// outside `[g(hi), g(lo)]` is reported through `violation`.
pub(crate) fn bisect_decreasing<G>(
    mut g: G,
    lo: f64,
    hi: f64,
    g_lo: f64,
    g_hi: f64,
    cfg: &SolverConfig,
    residual_tol: f64,
    monotone: bool,
    violation: &dyn Fn(String) -> MeanError,
) -> Result<SolverReport<f64>>
where
    G: FnMut(f64) -> Result<f64>,
{
    debug_assert!(lo < hi);
    let (mut a, mut b, mut ga, mut gb) = (lo, hi, g_lo, g_hi);
    let mut trace = cfg.record_trace.then(Vec::new);

    for it in 1..=cfg.max_iter {
        let mid = a + 0.5 * (b - a);
        let gm = g(mid)?;
        if !gm.is_finite() {
            return Err(violation(format!("non-finite value {gm} at {mid}")));
        }
        if monotone && (gm > ga || gm < gb) {
            return Err(violation(format!(
                "not monotone: g({a}) = {ga}, g({mid}) = {gm}, g({b}) = {gb}"
            )));
        }
        if let Some(t) = trace.as_mut() {
            t.push(mid);
        }
        if gm.abs() <= residual_tol {
            return Ok(SolverReport {
                value: mid,
                residual: gm.abs(),
                iterations: it,
                converged: true,
                trace,
            });
        }
        if gm > 0.0 {
            a = mid;
            ga = gm;
        } else {
            b = mid;
            gb = gm;
        }
        let collapsed = a + 0.5 * (b - a) == a || a + 0.5 * (b - a) == b;
        if b - a <= cfg.abs_tol + cfg.rel_tol * a.abs().min(b.abs()) || collapsed {
            let value = a + 0.5 * (b - a);
            let residual = g(value)?.abs();
            return Ok(SolverReport {
                value,
                residual,
                iterations: it,
                converged: true,
                trace,
            });
        }
    }
    let value = a + 0.5 * (b - a);
    Ok(SolverReport {
        value,
        residual: g(value)?.abs(),
        iterations: cfg.max_iter,
        converged: false,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_root_of_line() {
        let cfg = SolverConfig::default();
        let r = bisect_decreasing(
            |t| Ok(2.0 - t),
            0.0,
            3.0,
            2.0,
            -1.0,
            &cfg,
            1e-14,
            true,
            &|m| MeanError::InvalidDeviation(m),
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reports_non_monotone() {
        let cfg = SolverConfig::default();
        // rises in the middle of the bracket
        let r = bisect_decreasing(
            |t: f64| Ok(if t > 0.4 && t < 0.6 { 5.0 } else { 0.5 - t }),
            0.0,
            1.0,
            0.5,
            -0.5,
            &cfg,
            1e-14,
            true,
            &|m| MeanError::InvalidDeviation(m),
        );
        assert!(matches!(r, Err(MeanError::InvalidDeviation(_))));
    }

    #[test]
    fn iteration_cap_gives_unconverged_report() {
        let cfg = SolverConfig::default().with_max_iter(3);
        let r = bisect_decreasing(
            |t| Ok(0.123 - t),
            0.0,
            1.0,
            0.123,
            -0.877,
            &cfg,
            0.0,
            true,
            &|m| MeanError::InvalidDeviation(m),
        )
        .unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
        assert!(r.into_result().unwrap_err().is_no_convergence());
    }
}
