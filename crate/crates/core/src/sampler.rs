use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Interval, Point};
use crate::error::{MeanError, Result};

/// Uniform (or log-uniform) sampling from the box `[lo, hi]^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampler {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub log_uniform: bool,
    #[serde(default = "one")]
    pub dim: usize,
}

fn one() -> usize {
    1
}

impl Sampler {
    pub fn new(lo: f64, hi: f64, log_uniform: bool, dim: usize) -> Result<Self> {
        let s = Sampler {
            lo,
            hi,
            log_uniform,
            dim,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(MeanError::InvalidSampler(format!(
                "box [{}, {}] is empty or unbounded",
                self.lo, self.hi
            )));
        }
        if self.log_uniform && self.lo <= 0.0 {
            return Err(MeanError::InvalidSampler(
                "log-uniform sampling needs lo > 0".into(),
            ));
        }
        if self.dim == 0 {
            return Err(MeanError::InvalidSampler(
                "dimension must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Fails unless the whole box lies in `domain`.
    pub fn check_within(&self, domain: &Interval) -> Result<()> {
        if domain.contains(self.lo) && domain.contains(self.hi) {
            Ok(())
        } else {
            Err(MeanError::InvalidSampler(format!(
                "box [{}, {}] leaves the domain {domain}",
                self.lo, self.hi
            )))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let t: f64 = rng.random();
        let v = if self.log_uniform {
            (self.lo.ln() + t * (self.hi.ln() - self.lo.ln())).exp()
        } else {
            self.lo + t * (self.hi - self.lo)
        };
        v.clamp(self.lo, self.hi)
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        Point::new((0..self.dim).map(|_| self.sample(rng)).collect()).expect("finite box")
    }

    pub fn sample_tuple<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Point> {
        (0..n).map(|_| self.sample_point(rng)).collect()
    }

    /// A default box inside `domain`: `[0.1, 10]` log-uniform on positive
    /// domains, `[-5, 5]` otherwise, clipped to finite endpoints.
    pub fn default_for(domain: &Interval, dim: usize) -> Result<Self> {
        if domain.lo() >= 0.0 {
            let lo = if domain.contains(0.1) {
                0.1
            } else {
                domain.lo() + 0.1 * (domain.hi().min(domain.lo() + 10.0) - domain.lo())
            };
            let hi = if domain.contains(10.0) {
                10.0
            } else {
                lo + 0.8 * (domain.hi() - lo)
            };
            return Sampler::new(lo, hi, lo > 0.0, dim);
        }
        let lo = if domain.contains(-5.0) {
            -5.0
        } else {
            domain.lo() + 0.1 * (domain.hi().min(domain.lo() + 10.0) - domain.lo())
        };
        let hi = if domain.contains(5.0) {
            5.0
        } else {
            lo + 0.8 * (domain.hi() - lo)
        };
        Sampler::new(lo, hi, false, dim)
    }
}
