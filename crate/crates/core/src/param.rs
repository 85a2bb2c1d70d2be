//! Deterministic uncertainty sets and random-parameter distributions.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf;
use thiserror::Error;

use crate::expr::{ExprError, Expression};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid distribution parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("uncertainty set is empty at this point")]
    EmptySet,
    #[error("invalid uncertainty set: {0}")]
    InvalidSet(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// A scalar distribution parameter: a constant, or an expression over q.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Const(f64),
    Expr(Expression),
}

impl Param {
    fn resolve(&self, q: Option<&[f64]>) -> Result<f64, ParamError> {
        match self {
            Param::Const(v) => Ok(*v),
            Param::Expr(e) => {
                let q = q.ok_or_else(|| {
                    ParamError::InvalidParams(format!("parameter `{e}` depends on q but no q was supplied"))
                })?;
                Ok(e.evaluate(q, &[])?)
            }
        }
    }

    fn is_q_dependent(&self) -> bool {
        matches!(self, Param::Expr(e) if e.mentions_q())
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Const(v)
    }
}

/// Marginal law of one random component, possibly with q-dependent parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginalSpec {
    Uniform { lo: Param, hi: Param },
    Normal { mean: Param, std: Param },
    Laplace { location: Param, scale: Param },
    DiscretePmf { values: Vec<f64>, probs: Vec<f64> },
}

/// Marginal law with every parameter resolved to a number.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, std: f64 },
    Laplace { location: f64, scale: f64 },
    DiscretePmf { values: Vec<f64>, probs: Vec<f64> },
}

impl MarginalSpec {
    pub fn resolve(&self, q: Option<&[f64]>) -> Result<Marginal, ParamError> {
        let m = match self {
            MarginalSpec::Uniform { lo, hi } => Marginal::Uniform {
                lo: lo.resolve(q)?,
                hi: hi.resolve(q)?,
            },
            MarginalSpec::Normal { mean, std } => Marginal::Normal {
                mean: mean.resolve(q)?,
                std: std.resolve(q)?,
            },
            MarginalSpec::Laplace { location, scale } => Marginal::Laplace {
                location: location.resolve(q)?,
                scale: scale.resolve(q)?,
            },
            MarginalSpec::DiscretePmf { values, probs } => Marginal::DiscretePmf {
                values: values.clone(),
                probs: probs.clone(),
            },
        };
        m.validate()?;
        Ok(m)
    }

    pub fn is_q_dependent(&self) -> bool {
        match self {
            MarginalSpec::Uniform { lo, hi } => lo.is_q_dependent() || hi.is_q_dependent(),
            MarginalSpec::Normal { mean, std } => mean.is_q_dependent() || std.is_q_dependent(),
            MarginalSpec::Laplace { location, scale } => location.is_q_dependent() || scale.is_q_dependent(),
            MarginalSpec::DiscretePmf { .. } => false,
        }
    }
}

impl Marginal {
    pub fn validate(&self) -> Result<(), ParamError> {
        let bad = |msg: String| Err(ParamError::InvalidParams(msg));
        match self {
            Marginal::Uniform { lo, hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return bad(format!("uniform needs finite lo < hi, got [{lo}, {hi}]"));
                }
            }
            Marginal::Normal { mean, std } => {
                if !(*std > 0.0) || !mean.is_finite() || !std.is_finite() {
                    return bad(format!("normal needs std > 0, got mean {mean}, std {std}"));
                }
            }
            Marginal::Laplace { location, scale } => {
                if !(*scale > 0.0) || !location.is_finite() || !scale.is_finite() {
                    return bad(format!("laplace needs scale > 0, got location {location}, scale {scale}"));
                }
            }
            Marginal::DiscretePmf { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return bad("discrete law needs equal-length, non-empty values and probs".into());
                }
                if probs.iter().any(|p| !(*p >= 0.0)) || values.iter().any(|v| !v.is_finite()) {
                    return bad("discrete probabilities must be nonnegative and values finite".into());
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("discrete probabilities sum to {total}, not 1"));
                }
            }
        }
        Ok(())
    }

    /// `P(delta <= x)`; right-continuous for discrete laws.
    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        match self {
            Marginal::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Marginal::Normal { mean, std } => {
                0.5 * erf::erfc(-(x - mean) / (std * std::f64::consts::SQRT_2))
            }
            Marginal::Laplace { location, scale } => {
                let z = (x - location) / scale;
                if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                }
            }
            Marginal::DiscretePmf { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(v, _)| **v <= x)
                .map(|(_, p)| p)
                .sum::<f64>()
                .min(1.0),
        }
    }

    /// Generalized inverse `inf { x : cdf(x) >= u }` for `u` in (0, 1).
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        match self {
            Marginal::Uniform { lo, hi } => lo + u * (hi - lo),
            Marginal::Normal { mean, std } => {
                let n = Normal::new(*mean, *std).expect("validated");
                n.inverse_cdf(u)
            }
            Marginal::Laplace { location, scale } => {
                if u < 0.5 {
                    location + scale * (2.0 * u).ln()
                } else {
                    location - scale * (2.0 * (1.0 - u)).ln()
                }
            }
            Marginal::DiscretePmf { values, probs } => {
                let mut order: Vec<usize> = (0..values.len()).collect();
                order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
                let mut acc = 0.0;
                for &i in &order {
                    acc += probs[i];
                    if u <= acc {
                        return values[i];
                    }
                }
                // rounding in the cumulative sum: fall back to the largest
                // value that carries mass
                order
                    .iter()
                    .rev()
                    .find(|&&i| probs[i] > 0.0)
                    .map(|&i| values[i])
                    .unwrap_or(values[order[order.len() - 1]])
            }
        }
    }

    /// Smallest closed interval holding all the mass, with infinite ends
    /// for unbounded laws.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Marginal::Uniform { lo, hi } => (*lo, *hi),
            Marginal::Normal { .. } | Marginal::Laplace { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Marginal::DiscretePmf { values, probs } => values
                .iter()
                .zip(probs)
                .filter(|(_, p)| **p > 0.0)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (v, _)| (a.min(*v), b.max(*v))),
        }
    }

    pub fn is_bounded(&self) -> bool {
        let (a, b) = self.support();
        a.is_finite() && b.is_finite()
    }

    /// Closed interval holding at least `level` of the mass, centred on the
    /// median for continuous laws.
    ///
    /// For discrete laws this is the narrowest window of sorted support
    /// points whose mass reaches `level`.
    pub fn central_interval(&self, level: f64) -> (f64, f64) {
        let level = level.clamp(0.0, 1.0);
        match self {
            Marginal::Uniform { lo, hi } => {
                let c = 0.5 * (lo + hi);
                let h = 0.5 * level * (hi - lo);
                (c - h, c + h)
            }
            Marginal::Normal { .. } | Marginal::Laplace { .. } => {
                if level >= 1.0 {
                    return (f64::NEG_INFINITY, f64::INFINITY);
                }
                let t = 0.5 * (1.0 - level);
                (self.inverse_cdf(t), self.inverse_cdf(1.0 - t))
            }
            Marginal::DiscretePmf { values, probs } => {
                let mut pts: Vec<(f64, f64)> = values.iter().copied().zip(probs.iter().copied()).collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut best: Option<(f64, f64)> = None;
                for i in 0..pts.len() {
                    let mut mass = 0.0;
                    for j in i..pts.len() {
                        mass += pts[j].1;
                        if mass >= level - 1e-12 {
                            let cand = (pts[i].0, pts[j].0);
                            if best.is_none_or(|b| cand.1 - cand.0 < b.1 - b.0) {
                                best = Some(cand);
                            }
                            break;
                        }
                    }
                }
                best.unwrap_or((pts[0].0, pts[pts.len() - 1].0))
            }
        }
    }

    /// Interval probability `P(a < delta <= b)`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }
}

/// Closed-form CDF of a resolved marginal, after validating its parameters.
pub fn cdf_scalar(marginal: &Marginal, x: f64) -> Result<f64, ParamError> {
    marginal.validate()?;
    Ok(marginal.cdf(x))
}

/// Law of the random vector: independent marginals, one per component.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    pub marginals: Vec<MarginalSpec>,
}

/// A [`DistributionSpec`] with every parameter resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub marginals: Vec<Marginal>,
}

impl DistributionSpec {
    pub fn new(marginals: Vec<MarginalSpec>) -> Self {
        Self { marginals }
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn is_q_dependent(&self) -> bool {
        self.marginals.iter().any(MarginalSpec::is_q_dependent)
    }

    pub fn is_discrete(&self) -> bool {
        self.marginals
            .iter()
            .all(|m| matches!(m, MarginalSpec::DiscretePmf { .. }))
    }

    pub fn resolve(&self, q: Option<&[f64]>) -> Result<Distribution, ParamError> {
        Ok(Distribution {
            marginals: self
                .marginals
                .iter()
                .map(|m| m.resolve(q))
                .collect::<Result<_, _>>()?,
        })
    }
}

impl Distribution {
    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    /// Sample `index` of the stream for `seed`.
    ///
    /// Each sample consumes a fixed block of the ChaCha8 keystream, located by
    /// jumping to `index * dim`, so any partition of the index range yields
    /// the same samples.
    pub fn sample_at(&self, seed: u64, index: u64) -> Vec<f64> {
        let dim = self.marginals.len() as u128;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // two 32-bit words per u64 draw
        rng.set_word_pos(2 * dim * index as u128);
        self.marginals
            .iter()
            .map(|m| {
                let bits = rng.next_u64() >> 11;
                // midpoint of a 2^-53 cell: strictly inside (0, 1)
                let u = (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
                m.inverse_cdf(u)
            })
            .collect()
    }

    /// Product law mass of the half-open box `(lo, hi]`.
    pub fn box_mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.marginals
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(m, (a, b))| m.mass(*a, *b))
            .product()
    }

    /// Joint support points and their probabilities, for all-discrete laws.
    pub fn discrete_atoms(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        let mut atoms = vec![(Vec::new(), 1.0)];
        for m in &self.marginals {
            let Marginal::DiscretePmf { values, probs } = m else {
                return None;
            };
            let mut next = Vec::with_capacity(atoms.len() * values.len());
            for (point, p) in &atoms {
                for (v, pv) in values.iter().zip(probs) {
                    let mut x = point.clone();
                    x.push(*v);
                    next.push((x, p * pv));
                }
            }
            atoms = next;
        }
        Some(atoms)
    }
}

/// Draws `count` samples. `q` must be supplied iff some parameter depends on q.
pub fn sample(
    dist: &DistributionSpec,
    q: Option<&[f64]>,
    seed: u64,
    count: usize,
) -> Result<Vec<Vec<f64>>, ParamError> {
    let resolved = dist.resolve(q)?;
    Ok((0..count as u64).map(|i| resolved.sample_at(seed, i)).collect())
}

/// Deterministic parameter domain.
#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintySet {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `sum_i weights[i] * (q_i - center[i])^2 <= bound`
    AxisEllipsoid {
        weights: Vec<f64>,
        center: Vec<f64>,
        bound: f64,
    },
    Discrete { points: Vec<Vec<f64>> },
    /// Box whose bounds are expressions over delta.
    ParamBox { lo: Vec<Expression>, hi: Vec<Expression> },
}

/// An uncertainty set at a fixed delta.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolvedSet {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    AxisEllipsoid {
        weights: Vec<f64>,
        center: Vec<f64>,
        bound: f64,
    },
    Discrete { points: Vec<Vec<f64>> },
    Empty,
}

impl UncertaintySet {
    pub fn dim(&self) -> usize {
        match self {
            UncertaintySet::Box { lo, .. } => lo.len(),
            UncertaintySet::AxisEllipsoid { weights, .. } => weights.len(),
            UncertaintySet::Discrete { points } => points.first().map_or(0, Vec::len),
            UncertaintySet::ParamBox { lo, .. } => lo.len(),
        }
    }

    pub fn is_parameterized(&self) -> bool {
        matches!(self, UncertaintySet::ParamBox { .. })
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let bad = |s: &str| Err(ParamError::InvalidSet(s.into()));
        match self {
            UncertaintySet::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return bad("box bounds differ in length");
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
                    return bad("box needs finite lo <= hi componentwise");
                }
            }
            UncertaintySet::AxisEllipsoid { weights, center, bound } => {
                if weights.len() != center.len() {
                    return bad("ellipsoid weights and center differ in length");
                }
                if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) || !(*bound > 0.0) || !bound.is_finite() {
                    return bad("ellipsoid needs positive weights and bound");
                }
            }
            UncertaintySet::Discrete { points } => {
                if points.is_empty() {
                    return bad("discrete set needs at least one point");
                }
                let n = points[0].len();
                if points.iter().any(|p| p.len() != n) {
                    return bad("discrete points differ in dimension");
                }
            }
            UncertaintySet::ParamBox { lo, hi } => {
                if lo.len() != hi.len() {
                    return bad("parameterized box bounds differ in length");
                }
                if lo.iter().chain(hi).any(Expression::mentions_q) {
                    return bad("parameterized box bounds may only use d-variables");
                }
            }
        }
        Ok(())
    }

    /// The set at `delta`. Only `ParamBox` reads `delta`; it resolves to
    /// `Empty` where some `lo(delta) > hi(delta)`.
    pub fn resolve(&self, delta: Option<&[f64]>) -> Result<ResolvedSet, ParamError> {
        Ok(match self {
            UncertaintySet::Box { lo, hi } => ResolvedSet::Box {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            UncertaintySet::AxisEllipsoid { weights, center, bound } => ResolvedSet::AxisEllipsoid {
                weights: weights.clone(),
                center: center.clone(),
                bound: *bound,
            },
            UncertaintySet::Discrete { points } => ResolvedSet::Discrete { points: points.clone() },
            UncertaintySet::ParamBox { lo, hi } => {
                let d = delta.ok_or_else(|| {
                    ParamError::InvalidSet("parameterized box needs a delta to resolve".into())
                })?;
                let eval = |es: &[Expression]| -> Result<Vec<f64>, ParamError> {
                    es.iter().map(|e| Ok(e.evaluate(&[], d)?)).collect()
                };
                let (l, h) = (eval(lo)?, eval(hi)?);
                if l.iter().zip(&h).any(|(a, b)| a > b) {
                    ResolvedSet::Empty
                } else {
                    ResolvedSet::Box { lo: l, hi: h }
                }
            }
        })
    }
}

impl ResolvedSet {
    pub fn contains(&self, q: &[f64]) -> Result<bool, ParamError> {
        let check = |n: usize| {
            if q.len() != n {
                Err(ParamError::DimensionMismatch { expected: n, got: q.len() })
            } else {
                Ok(())
            }
        };
        Ok(match self {
            ResolvedSet::Box { lo, hi } => {
                check(lo.len())?;
                q.iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| a <= x && x <= b)
            }
            ResolvedSet::AxisEllipsoid { weights, center, bound } => {
                check(weights.len())?;
                let s: f64 = q
                    .iter()
                    .zip(weights.iter().zip(center))
                    .map(|(x, (w, c))| w * (x - c) * (x - c))
                    .sum();
                s <= *bound * (1.0 + 4.0 * f64::EPSILON)
            }
            ResolvedSet::Discrete { points } => {
                check(points[0].len())?;
                points.iter().any(|p| p.as_slice() == q)
            }
            ResolvedSet::Empty => false,
        })
    }

    /// A representative interior point: box/ellipsoid centre, first discrete
    /// point.
    pub fn center(&self) -> Option<Vec<f64>> {
        match self {
            ResolvedSet::Box { lo, hi } => Some(lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect()),
            ResolvedSet::AxisEllipsoid { center, .. } => Some(center.clone()),
            ResolvedSet::Discrete { points } => points.first().cloned(),
            ResolvedSet::Empty => None,
        }
    }

    pub fn is_single_point(&self) -> bool {
        match self {
            ResolvedSet::Box { lo, hi } => lo == hi,
            ResolvedSet::Discrete { points } => points.len() == 1,
            _ => false,
        }
    }

    /// Grid probes of the set. Boxes: `resolution` points per axis including
    /// endpoints. Ellipsoids: bounding-box grid filtered by membership plus
    /// `resolution` points on each principal arc.
    pub fn grid(&self, resolution: usize) -> Vec<Vec<f64>> {
        let resolution = resolution.max(2);
        match self {
            ResolvedSet::Empty => Vec::new(),
            ResolvedSet::Discrete { points } => points.clone(),
            ResolvedSet::Box { lo, hi } => {
                let axes: Vec<Vec<f64>> = lo
                    .iter()
                    .zip(hi)
                    .map(|(&a, &b)| {
                        if a == b {
                            vec![a]
                        } else {
                            linspace(a, b, resolution)
                        }
                    })
                    .collect();
                tensor(&axes)
            }
            ResolvedSet::AxisEllipsoid { weights, center, bound } => {
                let radii: Vec<f64> = weights.iter().map(|w| (bound / w).sqrt()).collect();
                let axes: Vec<Vec<f64>> = center
                    .iter()
                    .zip(&radii)
                    .map(|(c, r)| linspace(c - r, c + r, resolution))
                    .collect();
                let mut pts: Vec<Vec<f64>> = tensor(&axes)
                    .into_iter()
                    .filter(|p| self.contains(p).unwrap_or(false))
                    .collect();
                let n = center.len();
                // boundary arcs in every coordinate plane
                for i in 0..n {
                    for j in (i + 1)..n {
                        for k in 0..resolution {
                            let t = std::f64::consts::TAU * k as f64 / resolution as f64;
                            let mut p = center.clone();
                            p[i] += radii[i] * t.cos();
                            p[j] += radii[j] * t.sin();
                            pts.push(p);
                        }
                    }
                }
                if n == 1 {
                    pts.push(vec![center[0] - radii[0]]);
                    pts.push(vec![center[0] + radii[0]]);
                }
                pts
            }
        }
    }
}

/// Exact membership test; `delta` must be supplied iff the set is a `ParamBox`.
pub fn membership(set: &UncertaintySet, q: &[f64], delta: Option<&[f64]>) -> Result<bool, ParamError> {
    if set.dim() != q.len() {
        return Err(ParamError::DimensionMismatch {
            expected: set.dim(),
            got: q.len(),
        });
    }
    set.resolve(delta)?.contains(q)
}

/// Grid enumeration of the set (see [`ResolvedSet::grid`]).
pub fn enumerate_q(
    set: &UncertaintySet,
    resolution: usize,
    delta: Option<&[f64]>,
) -> Result<Vec<Vec<f64>>, ParamError> {
    match set.resolve(delta)? {
        ResolvedSet::Empty => Err(ParamError::EmptySet),
        r => Ok(r.grid(resolution)),
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| {
            if k == n - 1 {
                b
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

pub(crate) fn tensor(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for p in &out {
            for &x in axis {
                let mut v = p.clone();
                v.push(x);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal(mean: f64, std: f64) -> Marginal {
        Marginal::Normal { mean, std }
    }

    #[test]
    fn normal_interval_probability() {
        let m = normal(2.0, 0.1);
        let p = cdf_scalar(&m, 2.21).unwrap() - cdf_scalar(&m, -0.11).unwrap();
        assert!((p - 0.982).abs() < 5e-4, "{p}");
    }

    #[test]
    fn laplace_interval_probability() {
        let m = Marginal::Laplace { location: 1.0, scale: 0.1 };
        let p = cdf_scalar(&m, 1.125).unwrap() - cdf_scalar(&m, 0.75).unwrap();
        assert!((p - 0.8157).abs() < 5e-4, "{p}");
        // closed form 1 - e^{-1.25}/2 - e^{-2.5}/2
        let exact = 1.0 - 0.5 * (-1.25f64).exp() - 0.5 * (-2.5f64).exp();
        assert!((p - exact).abs() < 1e-15);
    }

    #[test]
    fn uniform_median() {
        let m = Marginal::Uniform { lo: 0.0, hi: 1.0 };
        assert_eq!(cdf_scalar(&m, 0.5).unwrap(), 0.5);
        assert_eq!(m.cdf(-1.0), 0.0);
        assert_eq!(m.cdf(2.0), 1.0);
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(cdf_scalar(&Marginal::Uniform { lo: 1.0, hi: 1.0 }, 0.0).is_err());
        assert!(cdf_scalar(&normal(0.0, 0.0), 0.0).is_err());
        assert!(cdf_scalar(&Marginal::Laplace { location: 0.0, scale: -1.0 }, 0.0).is_err());
        let pmf = Marginal::DiscretePmf { values: vec![1.0, 2.0], probs: vec![0.5, 0.4] };
        assert!(cdf_scalar(&pmf, 0.0).is_err());
    }

    #[test]
    fn discrete_cdf_is_right_continuous() {
        let m = Marginal::DiscretePmf { values: vec![1.0, 2.0], probs: vec![0.25, 0.75] };
        assert_eq!(m.cdf(0.999), 0.0);
        assert_eq!(m.cdf(1.0), 0.25);
        assert_eq!(m.cdf(2.0), 1.0);
        // (a, b] convention
        assert_eq!(m.mass(1.0, 2.0), 0.75);
        assert_eq!(m.mass(0.5, 1.0), 0.25);
    }

    #[test]
    fn degenerate_discrete_sampling() {
        let d = DistributionSpec::new(vec![MarginalSpec::DiscretePmf { values: vec![7.0], probs: vec![1.0] }]);
        for seed in [0, 1, u64::MAX] {
            assert_eq!(sample(&d, None, seed, 3).unwrap(), vec![vec![7.0]; 3]);
        }
    }

    #[test]
    fn uniform_sample_mean() {
        let d = DistributionSpec::new(vec![MarginalSpec::Uniform { lo: 0.0.into(), hi: 1.0.into() }]);
        let s = sample(&d, None, 42, 100_000).unwrap();
        let mean = s.iter().map(|v| v[0]).sum::<f64>() / s.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn normal_sample_symmetry() {
        let d = DistributionSpec::new(vec![MarginalSpec::Normal { mean: 0.0.into(), std: 1.0.into() }]);
        let s = sample(&d, None, 7, 100_000).unwrap();
        let frac = s.iter().filter(|v| v[0] <= 0.0).count() as f64 / s.len() as f64;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn samples_independent_of_partition() {
        let d = DistributionSpec::new(vec![
            MarginalSpec::Uniform { lo: (-4.0).into(), hi: (-2.0).into() },
            MarginalSpec::Laplace { location: 1.0.into(), scale: 0.1.into() },
        ])
        .resolve(None)
        .unwrap();
        let all: Vec<_> = (0..64).map(|i| d.sample_at(9, i)).collect();
        let tail: Vec<_> = (32..64).map(|i| d.sample_at(9, i)).collect();
        assert_eq!(&all[32..], &tail[..]);
        assert_ne!(all[0], all[1]);
    }

    #[test]
    fn q_dependent_parameters_need_q() {
        let std = Param::Expr(Expression::parse("q1/8", 1, 0).unwrap());
        let mean = Param::Expr(Expression::parse("1.4 - 0.5*q1", 1, 0).unwrap());
        let d = DistributionSpec::new(vec![MarginalSpec::Normal { mean, std }]);
        assert!(d.is_q_dependent());
        assert!(d.resolve(None).is_err());
        let r = d.resolve(Some(&[0.7])).unwrap();
        let Marginal::Normal { mean, std } = r.marginals[0] else { panic!() };
        assert!((mean - 1.05).abs() < 1e-15 && (std - 0.0875).abs() < 1e-15);
        // std = 0 at q = 0 is caught at use time
        assert!(d.resolve(Some(&[0.0])).is_err());
    }

    #[test]
    fn membership_examples() {
        let ell = UncertaintySet::AxisEllipsoid {
            weights: vec![100.0, 25.0],
            center: vec![0.0, 0.0],
            bound: 9.0,
        };
        assert!(membership(&ell, &[0.3, 0.0], None).unwrap());
        assert!(!membership(&ell, &[0.31, 0.0], None).unwrap());

        let bx = UncertaintySet::Box { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] };
        assert!(!membership(&bx, &[0.0, 2.0], None).unwrap());
        assert!(matches!(membership(&bx, &[0.0], None), Err(ParamError::DimensionMismatch { .. })));

        let pb = UncertaintySet::ParamBox {
            lo: vec![Expression::parse("1 - d1/3", 0, 1).unwrap()],
            hi: vec![Expression::parse("2 - d1", 0, 1).unwrap()],
        };
        assert!(membership(&pb, &[0.5], Some(&[1.5])).unwrap());
        assert!(!membership(&pb, &[0.6], Some(&[1.5])).unwrap());
        assert!(!membership(&pb, &[0.5], Some(&[1.6])).unwrap());
    }

    #[test]
    fn enumerate_examples() {
        let d = UncertaintySet::Discrete { points: vec![vec![1.0], vec![2.0]] };
        assert_eq!(enumerate_q(&d, 5, None).unwrap(), vec![vec![1.0], vec![2.0]]);

        let b = UncertaintySet::Box { lo: vec![0.0], hi: vec![1.0] };
        assert_eq!(enumerate_q(&b, 3, None).unwrap(), vec![vec![0.0], vec![0.5], vec![1.0]]);

        let ell = UncertaintySet::AxisEllipsoid {
            weights: vec![100.0, 25.0],
            center: vec![0.0, 0.0],
            bound: 9.0,
        };
        let pts = enumerate_q(&ell, 21, None).unwrap();
        assert!(pts.len() > 21);
        for p in &pts {
            assert!(membership(&ell, p, None).unwrap(), "{p:?}");
        }

        let pb = UncertaintySet::ParamBox {
            lo: vec![Expression::parse("1 - d1/3", 0, 1).unwrap()],
            hi: vec![Expression::parse("2 - d1", 0, 1).unwrap()],
        };
        assert_eq!(enumerate_q(&pb, 3, Some(&[1.6])), Err(ParamError::EmptySet));
    }

    #[test]
    fn central_intervals() {
        let u = Marginal::Uniform { lo: 0.25, hi: 1.75 };
        let (a, b) = u.central_interval(0.3);
        assert!((a - 0.775).abs() < 1e-12 && (b - 1.225).abs() < 1e-12);
        let n = normal(0.0, 1.0);
        let (a, b) = n.central_interval(0.95);
        assert!((b - 1.959964).abs() < 1e-5 && (a + b).abs() < 1e-9);
        let pmf = Marginal::DiscretePmf { values: vec![0.0, 1.0, 5.0], probs: vec![0.45, 0.45, 0.1] };
        assert_eq!(pmf.central_interval(0.9), (0.0, 1.0));
    }

    fn marginals() -> Vec<Marginal> {
        vec![
            Marginal::Uniform { lo: -1.0, hi: 3.0 },
            normal(0.5, 2.0),
            Marginal::Laplace { location: -1.0, scale: 0.5 },
            Marginal::DiscretePmf { values: vec![-1.0, 0.0, 2.5], probs: vec![0.2, 0.5, 0.3] },
        ]
    }

    #[test]
    fn cdf_monotone_with_limits() {
        for m in marginals() {
            let mut prev = 0.0;
            for k in 0..1000 {
                let x = -20.0 + 40.0 * k as f64 / 999.0;
                let c = m.cdf(x);
                assert!(c >= prev && (0.0..=1.0).contains(&c), "{m:?} at {x}");
                prev = c;
            }
            assert!(m.cdf(-1e6) < 1e-12);
            assert!((m.cdf(1e6) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_cdf_matches() {
        for (k, m) in marginals().into_iter().enumerate() {
            let d = Distribution { marginals: vec![m.clone()] };
            let mut xs: Vec<f64> = (0..100_000u64).map(|i| d.sample_at(k as u64, i)[0]).collect();
            xs.sort_by(f64::total_cmp);
            let n = xs.len() as f64;
            let mut ks: f64 = 0.0;
            let mut i = 0;
            while i < xs.len() {
                let mut j = i;
                while j < xs.len() && xs[j] == xs[i] {
                    j += 1;
                }
                let c = m.cdf(xs[i]);
                ks = ks.max((j as f64 / n - c).abs()).max((i as f64 / n - m.cdf(xs[i] - 1e-12)).abs());
                i = j;
            }
            assert!(ks < 0.01, "{m:?}: {ks}");
        }
    }

    #[test]
    fn box_membership_matches_interval_test() {
        let lo = [-1.0, 0.0];
        let hi = [0.5, 2.0];
        let set = UncertaintySet::Box { lo: lo.to_vec(), hi: hi.to_vec() };
        for i in -12..=12 {
            for j in -12..=12 {
                let q = [i as f64 / 4.0, j as f64 / 4.0];
                let want = (lo[0] <= q[0] && q[0] <= hi[0]) && (lo[1] <= q[1] && q[1] <= hi[1]);
                assert_eq!(membership(&set, &q, None).unwrap(), want);
            }
        }
    }
}
