//! Serializable recipes for means.
//!
//! Expressions use `u` (and `v`) in one dimension and `u1..ud`, `v1..vd`
//! for points of `R^d`. Lists of weights, deviations or generators may be
//! given as a single entry, which is then repeated `arity` times.

use serde::{Deserialize, Deserializer, Serialize};

use crate::domain::{Interval, SolverConfig};
use crate::error::{MeanError, Result};
use crate::expr::{Compiled, Expr};
use crate::mean::MeanFn;
use crate::reduction::DeviationFamily;
use crate::scalar::{
    make_bajraktarevic_deviation, DeviationTuple, GeneratorFn, ScalarDeviation, WeightFn,
};
use crate::vector::{make_norm_sq_potential, make_potential_deviation, PotentialFn};

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(t) => vec![t],
        OneOrMany::Many(v) => v,
    })
}

fn opt_one_or_many<'de, D, T>(d: D) -> std::result::Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(Option::<OneOrMany<T>>::deserialize(d)?.map(|o| match o {
        OneOrMany::One(t) => vec![t],
        OneOrMany::Many(v) => v,
    }))
}

fn one() -> usize {
    1
}

/// A strictly increasing generator `f` with its inverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorSpec {
    /// `"id"`, `"log"` or `"exp"`.
    Named(String),
    /// `sgn(p) u^p`, or `ln` at `p = 0`.
    Power { power: f64 },
    /// `scale * base + shift`.
    Affine {
        base: Box<GeneratorSpec>,
        scale: f64,
        #[serde(default)]
        shift: f64,
    },
    Expr {
        f: Expr,
        inverse: Expr,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Interval>,
    },
}

impl GeneratorSpec {
    pub fn build(&self) -> Result<GeneratorFn> {
        match self {
            GeneratorSpec::Named(n) => match n.as_str() {
                "id" | "identity" => Ok(GeneratorFn::identity()),
                "log" | "ln" => Ok(GeneratorFn::log()),
                "exp" => Ok(GeneratorFn::exp()),
                other => Err(MeanError::arg(format!(
                    "unknown generator '{other}' (expected id, log or exp)"
                ))),
            },
            GeneratorSpec::Power { power } => GeneratorFn::power(*power),
            GeneratorSpec::Affine { base, scale, shift } => base.build()?.affine(*scale, *shift),
            GeneratorSpec::Expr { f, inverse, domain } => {
                let (fc, ic) = (f.bind(&["u"])?, inverse.bind(&["u"])?);
                GeneratorFn::new(
                    domain.unwrap_or_else(Interval::real_line),
                    f.source(),
                    move |u| fc.eval(&[u]),
                    move |t| ic.eval(&[t]),
                )
            }
        }
    }
}

/// A mean family with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeanDescriptor {
    Arithmetic {
        arity: usize,
        #[serde(default = "one")]
        dim: usize,
    },
    WeightedArithmetic {
        #[serde(deserialize_with = "one_or_many")]
        weights: Vec<Expr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arity: Option<usize>,
        #[serde(default = "one")]
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Interval>,
    },
    Holder {
        p: f64,
        arity: usize,
    },
    Gini {
        p: f64,
        q: f64,
        arity: usize,
    },
    QuasiArithmetic {
        f: GeneratorSpec,
        arity: usize,
    },
    Bajraktarevic {
        f: GeneratorSpec,
        #[serde(deserialize_with = "one_or_many")]
        weights: Vec<Expr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arity: Option<usize>,
        /// Defaults to the generator's domain.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Interval>,
    },
    Matkowski {
        #[serde(deserialize_with = "one_or_many")]
        fs: Vec<GeneratorSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arity: Option<usize>,
    },
    /// `E_i(u, v)` given as expressions in `u, v`.
    DeviationCustom {
        #[serde(deserialize_with = "one_or_many")]
        e: Vec<Expr>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arity: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Interval>,
    },
    /// Each deviation is the list of its `dim` covector components.
    GenDeviation {
        #[serde(deserialize_with = "one_or_many")]
        e: Vec<Vec<Expr>>,
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arity: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Interval>,
    },
    /// `F_i(u, v) = w_i(u) |v - u|^2`.
    NormSquaredPotential {
        #[serde(deserialize_with = "one_or_many")]
        weights: Vec<Expr>,
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arity: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Interval>,
    },
    /// `F_i(u, v)` as expressions, with optional gradients in `v`.
    CustomPotential {
        #[serde(deserialize_with = "one_or_many")]
        f: Vec<Expr>,
        #[serde(
            default,
            deserialize_with = "opt_one_or_many",
            skip_serializing_if = "Option::is_none"
        )]
        grad: Option<Vec<Vec<Expr>>>,
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arity: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<Interval>,
    },
}

fn expand<T: Clone>(what: &str, v: &[T], arity: Option<usize>) -> Result<Vec<T>> {
    match (v.len(), arity) {
        (_, Some(0)) => Err(MeanError::arg("arity must be positive")),
        (0, _) => Err(MeanError::arg(format!("no {what} given"))),
        (1, Some(n)) => Ok(vec![v[0].clone(); n]),
        (len, Some(n)) if len != n => Err(MeanError::arg(format!("{len} {what} for arity {n}"))),
        _ => Ok(v.to_vec()),
    }
}

fn positive(what: &str, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(MeanError::arg(format!("{what} must be positive")));
    }
    Ok(n)
}

/// `u` in one dimension, `u1..ud` otherwise.
pub fn point_vars(prefix: &str, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![prefix.to_string()]
    } else {
        (1..=dim).map(|k| format!("{prefix}{k}")).collect()
    }
}

fn bind_u(e: &Expr, dim: usize) -> Result<Compiled> {
    let names = point_vars("u", dim);
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Ok(e.bind(&refs)?)
}

fn bind_uv(e: &Expr, dim: usize) -> Result<Compiled> {
    let mut names = point_vars("u", dim);
    names.extend(point_vars("v", dim));
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Ok(e.bind(&refs)?)
}

fn weight(e: &Expr, dim: usize, domain: Interval) -> Result<WeightFn> {
    let c = bind_u(e, dim)?;
    WeightFn::over_points(domain, dim, e.source(), move |u| c.eval(u))
}

fn weights(
    es: &[Expr],
    arity: Option<usize>,
    dim: usize,
    domain: Interval,
) -> Result<Vec<WeightFn>> {
    expand("weights", es, arity)?
        .iter()
        .map(|e| weight(e, dim, domain))
        .collect()
}

fn covector_fn(
    comps: &[Expr],
    dim: usize,
) -> Result<impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static> {
    if comps.len() != dim {
        return Err(MeanError::arg(format!(
            "{} components for dimension {dim}",
            comps.len()
        )));
    }
    let cs = comps
        .iter()
        .map(|c| bind_uv(c, dim))
        .collect::<Result<Vec<_>>>()?;
    Ok(move |u: &[f64], v: &[f64]| {
        let mut a = u.to_vec();
        a.extend_from_slice(v);
        cs.iter().map(|c| c.eval(&a)).collect()
    })
}

fn label(comps: &[Expr]) -> String {
    let parts: Vec<&str> = comps.iter().map(Expr::source).collect();
    format!("[{}]", parts.join(", "))
}

impl MeanDescriptor {
    /// Number of arguments, when the descriptor fixes it.
    pub fn arity(&self) -> Option<usize> {
        use MeanDescriptor::*;
        match self {
            Arithmetic { arity, .. }
            | Holder { arity, .. }
            | Gini { arity, .. }
            | QuasiArithmetic { arity, .. } => Some(*arity),
            WeightedArithmetic {
                weights: v, arity, ..
            }
            | Bajraktarevic {
                weights: v, arity, ..
            }
            | DeviationCustom { e: v, arity, .. }
            | NormSquaredPotential {
                weights: v, arity, ..
            }
            | CustomPotential { f: v, arity, .. } => arity.or((v.len() > 1).then_some(v.len())),
            Matkowski { fs, arity } => arity.or((fs.len() > 1).then_some(fs.len())),
            GenDeviation { e, arity, .. } => arity.or((e.len() > 1).then_some(e.len())),
        }
    }

    /// Replaces the arity. Per-slot lists must then have one entry or
    /// exactly `n`.
    pub fn with_arity(mut self, n: usize) -> Self {
        use MeanDescriptor::*;
        match &mut self {
            Arithmetic { arity, .. }
            | Holder { arity, .. }
            | Gini { arity, .. }
            | QuasiArithmetic { arity, .. } => *arity = n,
            WeightedArithmetic { arity, .. }
            | Bajraktarevic { arity, .. }
            | DeviationCustom { arity, .. }
            | NormSquaredPotential { arity, .. }
            | CustomPotential { arity, .. }
            | Matkowski { arity, .. }
            | GenDeviation { arity, .. } => *arity = Some(n),
        }
        self
    }

    pub fn dim(&self) -> usize {
        use MeanDescriptor::*;
        match self {
            Arithmetic { dim, .. }
            | WeightedArithmetic { dim, .. }
            | GenDeviation { dim, .. }
            | NormSquaredPotential { dim, .. }
            | CustomPotential { dim, .. } => *dim,
            _ => 1,
        }
    }

    fn potentials(&self) -> Result<Vec<PotentialFn>> {
        match self {
            MeanDescriptor::NormSquaredPotential {
                weights: ws,
                dim,
                arity,
                domain,
            } => {
                let dim = positive("dim", *dim)?;
                weights(ws, *arity, dim, domain.unwrap_or_else(Interval::real_line))?
                    .iter()
                    .map(|w| make_norm_sq_potential(dim, w))
                    .collect()
            }
            MeanDescriptor::CustomPotential {
                f,
                grad,
                dim,
                arity,
                domain,
            } => {
                let dim = positive("dim", *dim)?;
                let domain = domain.unwrap_or_else(Interval::real_line);
                let fs = expand("potentials", f, *arity)?;
                let gs = match grad {
                    Some(g) => expand("gradients", g, Some(fs.len()))?
                        .into_iter()
                        .map(Some)
                        .collect(),
                    None => vec![None; fs.len()],
                };
                fs.iter()
                    .zip(gs)
                    .map(|(fe, ge)| {
                        let c = bind_uv(fe, dim)?;
                        let g = match ge {
                            Some(comps) => {
                                Some(std::sync::Arc::new(covector_fn(&comps, dim)?) as _)
                            }
                            None => None,
                        };
                        PotentialFn::new(
                            dim,
                            domain,
                            fe.source(),
                            move |u, v| {
                                let mut a = u.to_vec();
                                a.extend_from_slice(v);
                                c.eval(&a)
                            },
                            g,
                        )
                    })
                    .collect()
            }
            _ => Err(MeanError::arg("not a potential descriptor")),
        }
    }

    /// The weights and dimension of a weighted arithmetic mean.
    pub fn weight_fns(&self) -> Result<(Vec<WeightFn>, usize)> {
        match self {
            MeanDescriptor::WeightedArithmetic {
                weights: ws,
                arity,
                dim,
                domain,
            } => {
                let dim = positive("dim", *dim)?;
                let ws = weights(ws, *arity, dim, domain.unwrap_or_else(Interval::real_line))?;
                Ok((ws, dim))
            }
            _ => Err(MeanError::arg("expected a weighted-arithmetic descriptor")),
        }
    }

    /// The deviations generating this mean.
    pub fn deviation_family(&self) -> Result<DeviationFamily> {
        use MeanDescriptor::*;
        let scalar =
            |ds: Vec<ScalarDeviation>| Ok(DeviationFamily::Scalar(DeviationTuple::new(ds)?));
        match self {
            Arithmetic { arity, dim } => {
                let n = positive("arity", *arity)?;
                if *dim == 1 {
                    scalar(vec![ScalarDeviation::arithmetic(); n])
                } else {
                    let w = WeightFn::constant(1.0)?;
                    Ok(DeviationFamily::Vector(vec![
                        crate::vector::GenDeviation::inner_product(positive("dim", *dim)?, &w)?;
                        n
                    ]))
                }
            }
            WeightedArithmetic {
                weights: ws,
                arity,
                dim,
                domain,
            } => {
                let dim = positive("dim", *dim)?;
                let ws = weights(ws, *arity, dim, domain.unwrap_or_else(Interval::real_line))?;
                if dim == 1 {
                    let id = GeneratorFn::identity();
                    scalar(
                        ws.iter()
                            .map(|w| make_bajraktarevic_deviation(&id, w))
                            .collect::<Result<_>>()?,
                    )
                } else {
                    Ok(DeviationFamily::Vector(
                        ws.iter()
                            .map(|w| crate::vector::GenDeviation::inner_product(dim, w))
                            .collect::<Result<_>>()?,
                    ))
                }
            }
            Holder { p, arity } => scalar(vec![
                ScalarDeviation::holder(*p)?;
                positive("arity", *arity)?
            ]),
            Gini { p, q, arity } => scalar(vec![
                ScalarDeviation::gini(*p, *q)?;
                positive("arity", *arity)?
            ]),
            QuasiArithmetic { f, arity } => {
                scalar(vec![
                    ScalarDeviation::quasi_arithmetic(&f.build()?);
                    positive("arity", *arity)?
                ])
            }
            Bajraktarevic {
                f,
                weights: ws,
                arity,
                domain,
            } => {
                let g = f.build()?;
                let ws = weights(ws, *arity, 1, domain.unwrap_or(g.domain()))?;
                scalar(
                    ws.iter()
                        .map(|w| make_bajraktarevic_deviation(&g, w))
                        .collect::<Result<_>>()?,
                )
            }
            Matkowski { fs, arity } => scalar(
                expand("generators", fs, *arity)?
                    .iter()
                    .map(|f| Ok(ScalarDeviation::quasi_arithmetic(&f.build()?)))
                    .collect::<Result<_>>()?,
            ),
            DeviationCustom { e, arity, domain } => {
                let domain = domain.unwrap_or_else(Interval::real_line);
                scalar(
                    expand("deviations", e, *arity)?
                        .iter()
                        .map(|ex| {
                            let c = bind_uv(ex, 1)?;
                            ScalarDeviation::new(domain, ex.source(), move |u, v| c.eval(&[u, v]))
                        })
                        .collect::<Result<_>>()?,
                )
            }
            GenDeviation {
                e,
                dim,
                arity,
                domain,
            } => {
                let dim = positive("dim", *dim)?;
                let domain = domain.unwrap_or_else(Interval::real_line);
                Ok(DeviationFamily::Vector(
                    expand("deviations", e, *arity)?
                        .iter()
                        .map(|comps| {
                            crate::vector::GenDeviation::new(
                                dim,
                                domain,
                                label(comps),
                                covector_fn(comps, dim)?,
                            )
                        })
                        .collect::<Result<_>>()?,
                ))
            }
            NormSquaredPotential { .. } | CustomPotential { .. } => Ok(DeviationFamily::Vector(
                self.potentials()?
                    .iter()
                    .map(make_potential_deviation)
                    .collect::<Result<Vec<crate::vector::GenDeviation>>>()?,
            )),
        }
    }

    /// Constructs the mean. Closed forms are used where they exist.
    pub fn build(&self, cfg: &SolverConfig) -> Result<MeanFn> {
        use MeanDescriptor::*;
        match self {
            Arithmetic { arity, dim } => {
                MeanFn::arithmetic(positive("arity", *arity)?, positive("dim", *dim)?)
            }
            WeightedArithmetic {
                weights: ws,
                arity,
                dim,
                domain,
            } => {
                let dim = positive("dim", *dim)?;
                MeanFn::weighted_arithmetic(
                    weights(ws, *arity, dim, domain.unwrap_or_else(Interval::real_line))?,
                    dim,
                )
            }
            Holder { p, arity } => MeanFn::holder(*p, positive("arity", *arity)?),
            Gini { p, q, arity } => MeanFn::gini(*p, *q, positive("arity", *arity)?),
            QuasiArithmetic { f, arity } => {
                MeanFn::quasi_arithmetic(f.build()?, positive("arity", *arity)?)
            }
            Bajraktarevic {
                f,
                weights: ws,
                arity,
                domain,
            } => {
                let g = f.build()?;
                let ws = weights(ws, *arity, 1, domain.unwrap_or(g.domain()))?;
                MeanFn::bajraktarevic(g, ws)
            }
            Matkowski { fs, arity } => MeanFn::matkowski(
                expand("generators", fs, *arity)?
                    .iter()
                    .map(GeneratorSpec::build)
                    .collect::<Result<_>>()?,
                cfg.clone(),
            ),
            NormSquaredPotential { .. } | CustomPotential { .. } => {
                MeanFn::potential(self.potentials()?, cfg.clone())
            }
            DeviationCustom { .. } | GenDeviation { .. } => self.deviation_family()?.mean(cfg),
        }
    }
}
