//! Plain-text tuples: `1,7` is two scalars, `1,2; 3,4` two points of `R^2`.

use crate::domain::{common_dim, Injection, Point};
use crate::error::{MeanError, Result};

fn malformed(msg: impl Into<String>) -> MeanError {
    MeanError::Malformed(msg.into())
}

/// Comma or whitespace separated finite reals, at least one.
pub fn parse_reals(s: &str) -> Result<Vec<f64>> {
    let out = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            let v: f64 = t
                .parse()
                .map_err(|_| malformed(format!("'{t}' is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(malformed(format!("'{t}' is not finite")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(malformed("empty tuple"));
    }
    Ok(out)
}

/// Points separated by `;`. Without `;`, every number is a point of `R^1`.
pub fn parse_points(s: &str) -> Result<Vec<Point>> {
    let pts = if s.contains(';') {
        s.split(';')
            .filter(|p| !p.trim().is_empty())
            .map(|p| Point::new(parse_reals(p)?))
            .collect::<Result<Vec<_>>>()?
    } else {
        parse_reals(s)?
            .into_iter()
            .map(Point::scalar)
            .collect::<Result<Vec<_>>>()?
    };
    if pts.is_empty() {
        return Err(malformed("empty tuple"));
    }
    common_dim(&pts).map_err(|e| malformed(e.to_string()))?;
    Ok(pts)
}

/// A one-based injection into `{1, ..., n}`, written like a tuple.
pub fn parse_injection(s: &str, n: usize) -> Result<Injection> {
    let idx = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| malformed(format!("'{t}' is not an index")))
        })
        .collect::<Result<Vec<_>>>()?;
    Injection::new(n, &idx)
}

/// Inverse of [`parse_points`] for points of one dimension. A lone vector
/// point keeps a trailing `;` so it does not read back as scalars.
pub fn format_points(x: &[Point]) -> String {
    let parts: Vec<String> = x
        .iter()
        .map(|p| {
            p.coords()
                .iter()
                .map(|c| format!("{c:?}"))
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    if x.iter().all(|p| p.dim() == 1) {
        parts.join(",")
    } else if parts.len() == 1 {
        format!("{};", parts[0])
    } else {
        parts.join(";")
    }
}
