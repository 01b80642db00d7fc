//! Means built from deviations, their reductions along injections, and
//! randomized checks of reducible inequalities between means.

mod bisect;
pub mod descriptor;
pub mod domain;
pub mod error;
pub mod expr;
pub mod hull;
pub mod lab;
pub mod mean;
pub mod reduction;
pub mod sampler;
pub mod scalar;
pub mod suite;
pub mod textio;
pub mod vector;

pub use domain::{
    hull_combination, in_hull_1d, select, splice, Barycentric, Injection, Interval, Point,
    SolverConfig, SolverReport,
};
pub use error::{MeanError, Result};
