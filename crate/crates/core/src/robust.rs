//! Deterministic robust stability over a parameter set `Q` at a fixed delta.
//!
//! The robust indicator `F(delta)` is true when the polynomial is stable for
//! every `q` in `Q`. Three routes compute it:
//!
//! * Kharitonov's four vertex polynomials, exact for interval families
//!   (each q-variable drives at most one coefficient, `Q` a box);
//! * a frequency sweep of the value set `{P(i w, q, delta) : q in Q}`, which is a
//!   zonotope (box `Q`) or an ellipse (ellipsoidal `Q`) when the coefficients
//!   are affine in q, checked for origin exclusion;
//! * a grid over `Q`, which only samples the family and is labelled as such.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{AffineForm, ExprError, Expression};
use crate::param::{ParamError, ResolvedSet, UncertaintySet};
use crate::poly::{routh_strict, PolyError, Polynomial, StabilityKind, LEADING_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RobustError {
    #[error("method not applicable: {0}")]
    MethodInapplicable(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid coefficient map: {0}")]
    InvalidMap(String),
    #[error("invalid interval [{lo}, {hi}] for coefficient {index}")]
    InvalidInterval { index: usize, lo: f64, hi: f64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// How much trust a robustness verdict deserves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Guarantee {
    /// Holds for every q in the set (up to floating point).
    Certified,
    /// Only checked at finitely many probes of a continuum.
    Sampled,
}

impl Guarantee {
    pub fn and(self, other: Guarantee) -> Guarantee {
        if self == Guarantee::Certified && other == Guarantee::Certified {
            Guarantee::Certified
        } else {
            Guarantee::Sampled
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub robust: bool,
    pub guarantee: Guarantee,
}

pub const DEFAULT_GRID_RESOLUTION: usize = 41;
pub const DEFAULT_OMEGA_POINTS: usize = 1024;
/// A sweep whose closest approach to the origin is below this is re-run
/// once with twice the frequency points.
pub const REFINE_DISTANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RobustMethod {
    #[default]
    Auto,
    Kharitonov,
    ZeroExclusion {
        /// `None` picks the Cauchy root bound of the family.
        omega_max: Option<f64>,
        omega_points: usize,
    },
    GridFallback {
        resolution: usize,
    },
}

impl RobustMethod {
    pub fn validate(&self) -> Result<(), RobustError> {
        match *self {
            RobustMethod::ZeroExclusion { omega_points, omega_max } => {
                if omega_points < 64 {
                    return Err(RobustError::MethodInapplicable(format!(
                        "zero exclusion needs at least 64 frequency points, got {omega_points}"
                    )));
                }
                if let Some(w) = omega_max {
                    if !(w > 0.0) || !w.is_finite() {
                        return Err(RobustError::MethodInapplicable(format!("omega_max must be positive, got {w}")));
                    }
                }
            }
            RobustMethod::GridFallback { resolution } if resolution < 2 => {
                return Err(RobustError::MethodInapplicable(format!(
                    "grid fallback needs resolution >= 2, got {resolution}"
                )));
            }
            _ => {}
        }
        Ok(())
    }
}

/// `(q, delta) -> P(x, q, delta)` with coefficients as expressions, ascending
/// powers.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMap {
    kind: StabilityKind,
    n: usize,
    m: usize,
    coeffs: Vec<Expression>,
    affine: Option<Vec<AffineForm>>,
}

impl CoefficientMap {
    pub fn new(kind: StabilityKind, n: usize, m: usize, coeffs: Vec<Expression>) -> Result<Self, RobustError> {
        if coeffs.len() < 2 {
            return Err(RobustError::InvalidMap(
                "a characteristic polynomial needs at least two coefficients".into(),
            ));
        }
        if let Some(e) = coeffs.iter().find(|e| e.dims() != (n, m)) {
            return Err(RobustError::InvalidMap(format!(
                "coefficient `{}` declared with dims {:?}, map has ({n}, {m})",
                e.source(),
                e.dims()
            )));
        }
        let affine = coeffs.iter().map(Expression::affine_in_q).collect();
        Ok(Self {
            kind,
            n,
            m,
            coeffs,
            affine,
        })
    }

    /// Parses coefficient expressions listed highest power first.
    pub fn parse_descending<S: AsRef<str>>(
        kind: StabilityKind,
        n: usize,
        m: usize,
        coeffs: &[S],
    ) -> Result<Self, RobustError> {
        let parsed = coeffs
            .iter()
            .rev()
            .map(|s| Expression::parse(s.as_ref(), n, m))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(kind, n, m, parsed)
    }

    pub fn kind(&self) -> StabilityKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn coeffs(&self) -> &[Expression] {
        &self.coeffs
    }

    /// Declared degree: number of coefficients minus one.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Affine decomposition of every coefficient, when each one is affine in q.
    pub fn affine(&self) -> Option<&[AffineForm]> {
        self.affine.as_deref()
    }

    pub fn depends_on_q(&self) -> bool {
        self.coeffs.iter().any(Expression::mentions_q)
    }

    /// True when the coefficients are affine in q and every q-variable enters
    /// at most one coefficient, so a box in q maps onto a box of coefficients.
    pub fn is_interval_family(&self) -> bool {
        let Some(forms) = self.affine() else {
            return false;
        };
        (0..self.n).all(|i| {
            forms
                .iter()
                .filter(|f| !matches!(f.coeffs[i].ast(), crate::expr::Node::Const(c) if *c == 0.0))
                .count()
                <= 1
        })
    }

    pub fn eval_coeffs(&self, q: &[f64], delta: &[f64]) -> Result<Vec<f64>, RobustError> {
        self.check_dims(q, delta)?;
        Ok(self
            .coeffs
            .iter()
            .map(|e| e.evaluate(q, delta))
            .collect::<Result<Vec<_>, _>>()?)
    }

    pub fn polynomial(&self, q: &[f64], delta: &[f64]) -> Result<Polynomial, RobustError> {
        Ok(Polynomial::new(self.eval_coeffs(q, delta)?))
    }

    /// Strict stability at one point. A vanished leading coefficient (degree
    /// drop) counts as unstable.
    pub fn is_stable_at(&self, q: &[f64], delta: &[f64]) -> Result<bool, RobustError> {
        let c = self.eval_coeffs(q, delta)?;
        Ok(coeffs_stable(&c, self.kind))
    }

    /// The same polynomial with the d-variables re-declared as q-variables
    /// `q_{n+1}..q_{n+m}`.
    pub fn with_delta_as_q(&self) -> Self {
        Self::new(self.kind, self.n + self.m, 0, self.coeffs.iter().map(Expression::d_as_q).collect())
            .expect("re-indexing preserves validity")
    }

    fn check_dims(&self, q: &[f64], delta: &[f64]) -> Result<(), RobustError> {
        if q.len() != self.n || delta.len() != self.m {
            return Err(RobustError::DimensionMismatch(format!(
                "map expects q in R^{} and delta in R^{}, got {} and {}",
                self.n,
                self.m,
                q.len(),
                delta.len()
            )));
        }
        Ok(())
    }

    /// Affine pieces evaluated at `delta`: `a_j(q) = constant[j] + sum_i linear[j][i] q_i`.
    fn affine_at(&self, delta: &[f64]) -> Result<Option<AffineAt>, RobustError> {
        let Some(forms) = self.affine() else {
            return Ok(None);
        };
        let zeros = vec![0.0; self.n];
        let mut constant = Vec::with_capacity(forms.len());
        let mut linear = Vec::with_capacity(forms.len());
        for f in forms {
            constant.push(f.constant.evaluate(&zeros, delta)?);
            linear.push(
                f.coeffs
                    .iter()
                    .map(|c| c.evaluate(&zeros, delta))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        Ok(Some(AffineAt { constant, linear }))
    }
}

pub(crate) fn coeffs_stable(ascending: &[f64], kind: StabilityKind) -> bool {
    let lead = *ascending.last().expect("non-empty");
    if !(lead.abs() > LEADING_TOL) || ascending.iter().any(|c| !c.is_finite()) {
        return false;
    }
    match kind {
        StabilityKind::Hurwitz => routh_strict(ascending),
        StabilityKind::Schur => crate::poly::schur_cohn_strict(ascending),
    }
}

struct AffineAt {
    constant: Vec<f64>,
    linear: Vec<Vec<f64>>,
}

impl AffineAt {
    /// Exact range of every coefficient over a box or ellipsoid.
    fn ranges(&self, set: &ResolvedSet) -> Option<Vec<(f64, f64)>> {
        let (center, spread): (Vec<f64>, Box<dyn Fn(&[f64]) -> f64>) = match set {
            ResolvedSet::Box { lo, hi } => {
                let c = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
                let r: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
                (c, Box::new(move |l: &[f64]| l.iter().zip(&r).map(|(x, r)| x.abs() * r).sum()))
            }
            ResolvedSet::AxisEllipsoid { weights, center, bound } => {
                let s: Vec<f64> = weights.iter().map(|w| bound / w).collect();
                (
                    center.clone(),
                    Box::new(move |l: &[f64]| l.iter().zip(&s).map(|(x, s)| x * x * s).sum::<f64>().sqrt()),
                )
            }
            _ => return None,
        };
        Some(
            self.constant
                .iter()
                .zip(&self.linear)
                .map(|(c, l)| {
                    let mid = c + l.iter().zip(&center).map(|(x, q)| x * q).sum::<f64>();
                    let w = spread(l);
                    (mid - w, mid + w)
                })
                .collect(),
        )
    }
}

/// Componentwise coefficient ranges over the set at `delta`, and whether
/// they are exact (affine map over a box/ellipsoid, or a finite set) rather
/// than a grid hull. `None` for an empty set.
pub fn coefficient_ranges(
    map: &CoefficientMap,
    set: &ResolvedSet,
    delta: &[f64],
    grid_resolution: usize,
) -> Result<Option<(Vec<(f64, f64)>, bool)>, RobustError> {
    if matches!(set, ResolvedSet::Empty) {
        return Ok(None);
    }
    if let Some(aff) = map.affine_at(delta)? {
        if let Some(r) = aff.ranges(set) {
            return Ok(Some((r, true)));
        }
    }
    let exact = matches!(set, ResolvedSet::Discrete { .. }) || set.is_single_point() || !map.depends_on_q();
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); map.coeffs.len()];
    for q in set.grid(grid_resolution) {
        for (r, c) in ranges.iter_mut().zip(map.eval_coeffs(&q, delta)?) {
            r.0 = r.0.min(c);
            r.1 = r.1.max(c);
        }
    }
    Ok(Some((ranges, exact)))
}

/// Robust Hurwitz stability of the interval polynomial with ascending
/// coefficient intervals, via the four Kharitonov polynomials.
///
/// A family whose leading interval touches zero contains degree-dropped
/// members and is reported unstable.
pub fn kharitonov_hurwitz(intervals: &[(f64, f64)]) -> Result<bool, RobustError> {
    for (index, &(lo, hi)) in intervals.iter().enumerate() {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(RobustError::InvalidInterval { index, lo, hi });
        }
    }
    // trim identically-zero top coefficients
    let top = intervals
        .iter()
        .rposition(|&(lo, hi)| lo.abs() > LEADING_TOL || hi.abs() > LEADING_TOL)
        .ok_or(PolyError::ZeroPolynomial)?;
    let iv = &intervals[..=top];
    let (llo, lhi) = iv[top];
    if llo <= LEADING_TOL && lhi >= -LEADING_TOL {
        return Ok(false);
    }
    let flip = lhi < 0.0;
    let iv: Vec<(f64, f64)> = iv
        .iter()
        .map(|&(lo, hi)| if flip { (-hi, -lo) } else { (lo, hi) })
        .collect();
    if iv.len() == 1 {
        return Ok(true);
    }
    // low/high pattern by power mod 4
    const PATTERNS: [[bool; 4]; 4] = [
        [false, false, true, true],
        [true, true, false, false],
        [false, true, true, false],
        [true, false, false, true],
    ];
    Ok(PATTERNS.iter().all(|pat| {
        let c: Vec<f64> = iv
            .iter()
            .enumerate()
            .map(|(j, &(lo, hi))| if pat[j % 4] { hi } else { lo })
            .collect();
        routh_strict(&c)
    }))
}

/// Outcome of a frequency sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOutcome {
    pub robust: bool,
    /// Closest approach of the value set to the origin over the sweep
    /// (zero when the origin was hit).
    pub min_distance: f64,
    pub omega_max: f64,
    pub omega_points: usize,
}

/// Zero-exclusion test for an affine family over a box or axis ellipsoid.
///
/// True iff the centre polynomial is Hurwitz, the leading coefficient keeps
/// its sign over `Q`, and the value set at every swept frequency in
/// `[0, omega_max]` excludes the origin. `omega_max = None` uses one plus the
/// Cauchy root bound of the family.
///
/// Gaps between sweep points are not taken on trust: the origin distance is
/// Lipschitz in the frequency, and a gap whose end distances do not outrun
/// the speed bound is bisected (a gap that cannot be cleared fails the test).
/// The sweep stops early once the leading term dominates all others.
pub fn zero_exclusion_affine(
    map: &CoefficientMap,
    set: &UncertaintySet,
    delta: &[f64],
    omega_max: Option<f64>,
    omega_points: usize,
) -> Result<bool, RobustError> {
    let resolved = set.resolve(Some(delta))?;
    Ok(zero_exclusion_sweep(map, &resolved, delta, omega_max, omega_points)?.robust)
}

/// [`zero_exclusion_affine`] on a resolved set, with sweep diagnostics.
pub fn zero_exclusion_sweep(
    map: &CoefficientMap,
    set: &ResolvedSet,
    delta: &[f64],
    omega_max: Option<f64>,
    omega_points: usize,
) -> Result<SweepOutcome, RobustError> {
    if map.kind() != StabilityKind::Hurwitz {
        return Err(RobustError::MethodInapplicable(
            "the value-set sweep runs along the imaginary axis (Hurwitz only)".into(),
        ));
    }
    RobustMethod::ZeroExclusion { omega_max, omega_points }.validate()?;
    let aff = map
        .affine_at(delta)?
        .ok_or_else(|| RobustError::MethodInapplicable("coefficients are not affine in q".into()))?;
    let verdict = |robust, min_distance, w| SweepOutcome {
        robust,
        min_distance,
        omega_max: w,
        omega_points,
    };
    let ranges = match set {
        ResolvedSet::Empty => return Ok(verdict(true, f64::INFINITY, 0.0)),
        ResolvedSet::Box { lo, .. } | ResolvedSet::AxisEllipsoid { center: lo, .. } if lo.len() != map.n() => {
            return Err(RobustError::DimensionMismatch(format!(
                "set has dimension {}, map expects {}",
                lo.len(),
                map.n()
            )))
        }
        _ => aff.ranges(set).ok_or_else(|| {
            RobustError::MethodInapplicable("zero exclusion needs a box or axis ellipsoid".into())
        })?,
    };

    let (llo, lhi) = *ranges.last().expect("non-empty");
    if llo <= LEADING_TOL && lhi >= -LEADING_TOL {
        return Ok(verdict(false, 0.0, 0.0));
    }
    let center_q = set.center().expect("non-empty");
    let center_coeffs: Vec<f64> = aff
        .constant
        .iter()
        .zip(&aff.linear)
        .map(|(c, l)| c + l.iter().zip(&center_q).map(|(x, q)| x * q).sum::<f64>())
        .collect();
    if !coeffs_stable(&center_coeffs, StabilityKind::Hurwitz) {
        return Ok(verdict(false, 0.0, 0.0));
    }

    let lead_min = llo.abs().min(lhi.abs());
    let tail_max = ranges[..ranges.len() - 1]
        .iter()
        .fold(0.0f64, |m, &(lo, hi)| m.max(lo.abs()).max(hi.abs()));
    let w_max = omega_max.unwrap_or(1.0 + (1.0 + tail_max / lead_min));

    // generator coefficient vectors, one per q-direction
    let (gens, shape): (Vec<Vec<f64>>, Shape) = match set {
        ResolvedSet::Box { lo, hi } => (
            (0..map.n())
                .map(|i| aff.linear.iter().map(|l| l[i] * 0.5 * (hi[i] - lo[i])).collect())
                .collect(),
            Shape::Zonotope,
        ),
        ResolvedSet::AxisEllipsoid { weights, bound, .. } => (
            (0..map.n())
                .map(|i| {
                    let s = (bound / weights[i]).sqrt();
                    aff.linear.iter().map(|l| l[i] * s).collect()
                })
                .collect(),
            Shape::Ellipse,
        ),
        _ => unreachable!("ranges() accepted the set"),
    };

    let dist_at = |w: f64| -> f64 {
        let s = Complex64::new(0.0, w);
        let p = horner(&center_coeffs, s);
        let mut small = [Complex64::new(0.0, 0.0); 8];
        let mut large = Vec::new();
        let g: &mut [Complex64] = if gens.len() <= small.len() {
            &mut small[..gens.len()]
        } else {
            large.resize(gens.len(), Complex64::new(0.0, 0.0));
            &mut large
        };
        for (gi, c) in g.iter_mut().zip(&gens) {
            *gi = horner(c, s);
        }
        let (excluded, d) = match shape {
            Shape::Zonotope => zonotope_excludes_origin(p, g),
            Shape::Ellipse => ellipse_excludes_origin(p, g),
        };
        if excluded {
            d
        } else {
            0.0
        }
    };
    // every member moves at most this fast in w on [0, w]
    let amax: Vec<f64> = ranges.iter().map(|&(lo, hi)| lo.abs().max(hi.abs())).collect();
    let speed = |w: f64| -> f64 {
        amax.iter()
            .enumerate()
            .skip(1)
            .map(|(j, a)| j as f64 * a * w.powi(j as i32 - 1))
            .sum()
    };
    // the distance is Lipschitz in w, so a gap between two samples is clear
    // once the two distances outrun the speed bound; otherwise bisect
    let mut budget = 1usize << 16;
    let mut gap_clear = |a: f64, da: f64, b: f64, db: f64| -> bool {
        let mut stack = vec![(a, da, b, db)];
        while let Some((a, da, b, db)) = stack.pop() {
            if da + db > speed(b) * (b - a) {
                continue;
            }
            let m = 0.5 * (a + b);
            if budget == 0 || m <= a || m >= b {
                return false;
            }
            budget -= 1;
            let dm = dist_at(m);
            if dm == 0.0 {
                return false;
            }
            stack.push((a, da, m, dm));
            stack.push((m, dm, b, db));
        }
        true
    };
    // beyond w_tail the leading term dominates every other term, for all
    // members and all larger frequencies
    let deg = amax.len() - 1;
    let dominated = |w: f64| {
        lead_min > amax[..deg].iter().enumerate().map(|(j, a)| a * w.powi(j as i32 - deg as i32)).sum::<f64>()
    };
    let w_tail = if dominated(w_max) {
        let (mut lo, mut hi) = (0.0, w_max);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if dominated(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    } else {
        w_max
    };
    let mut sweep = |points: usize| -> (bool, f64) {
        let mut min_d = f64::INFINITY;
        let mut prev = (0.0, 0.0);
        for k in 0..points {
            let w = w_max * k as f64 / (points - 1) as f64;
            let d = dist_at(w);
            if d == 0.0 || (k > 0 && !gap_clear(prev.0, prev.1, w, d)) {
                return (false, 0.0);
            }
            min_d = min_d.min(d);
            prev = (w, d);
            if w >= w_tail {
                break;
            }
        }
        (true, min_d)
    };

    let (ok, d) = sweep(omega_points);
    if !ok {
        return Ok(verdict(false, 0.0, w_max));
    }
    if d < REFINE_DISTANCE {
        let (ok, d2) = sweep(2 * omega_points);
        return Ok(SweepOutcome {
            robust: ok,
            min_distance: d.min(d2),
            omega_max: w_max,
            omega_points: 2 * omega_points,
        });
    }
    Ok(verdict(true, d, w_max))
}

#[derive(Clone, Copy)]
enum Shape {
    Zonotope,
    Ellipse,
}

fn horner(ascending: &[f64], s: Complex64) -> Complex64 {
    ascending
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segment_distance(a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return a.norm();
    }
    let t = (-(a.re * ab.re + a.im * ab.im) / len2).clamp(0.0, 1.0);
    (a + ab * t).norm()
}

/// Whether the zonotope `center + sum_i [-1, 1] g_i` excludes the origin,
/// and its distance to the origin (zero when it does not).
pub(crate) fn zonotope_excludes_origin(center: Complex64, gens: &[Complex64]) -> (bool, f64) {
    let scale = center.norm() + gens.iter().map(|g| g.norm()).sum::<f64>();
    let margin = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut g: Vec<Complex64> = gens
        .iter()
        .filter(|g| g.norm() > 1e-15 * scale)
        .map(|&g| if g.im < 0.0 || (g.im == 0.0 && g.re < 0.0) { -g } else { g })
        .collect();
    if g.is_empty() {
        let d = center.norm();
        return (d > margin, d);
    }
    g.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let mut p = center - g.iter().sum::<Complex64>();
    let mut verts = Vec::with_capacity(2 * g.len());
    for gi in &g {
        verts.push(p);
        p += 2.0 * gi;
    }
    for gi in &g {
        verts.push(p);
        p -= 2.0 * gi;
    }
    let k = verts.len();
    let mut dist = f64::INFINITY;
    let mut inside = true;
    let mut area2 = 0.0;
    for i in 0..k {
        let a = verts[i];
        let b = verts[(i + 1) % k];
        dist = dist.min(segment_distance(a, b));
        area2 += cross(a, b);
        if cross(b - a, -a) < 0.0 {
            inside = false;
        }
    }
    let degenerate = area2.abs() <= 1e-12 * scale * scale;
    if (inside && !degenerate) || dist <= margin {
        (false, 0.0)
    } else {
        (true, dist)
    }
}

/// Whether the ellipse `center + M u, |u| <= 1` (columns of `M` given as
/// complex numbers) excludes the origin, and an estimate of its distance to
/// the origin.
pub(crate) fn ellipse_excludes_origin(center: Complex64, cols: &[Complex64]) -> (bool, f64) {
    let (mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0);
    for c in cols {
        a11 += c.re * c.re;
        a12 += c.re * c.im;
        a22 += c.im * c.im;
    }
    let tr = a11 + a22;
    let disc = ((a11 - a22) * (a11 - a22) + 4.0 * a12 * a12).sqrt();
    let lmax = 0.5 * (tr + disc);
    let lmin = 0.5 * (tr - disc);
    if !(lmin > 1e-12 * lmax) {
        // rank <= 1: a segment along the major axis
        let dir = if a12.abs() > 1e-300 {
            Complex64::new(lmax - a22, a12)
        } else if a11 >= a22 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 1.0)
        };
        let dir = dir / dir.norm();
        return zonotope_excludes_origin(center, &[dir * lmax.max(0.0).sqrt()]);
    }
    let det = a11 * a22 - a12 * a12;
    let (px, py) = (center.re, center.im);
    let form = (a22 * px * px - 2.0 * a12 * px * py + a11 * py * py) / det;
    if form <= 1.0 + 1e-9 {
        return (false, 0.0);
    }
    // the origin sits on the ellipse scaled by sqrt(form), whose gap to the
    // original is at least (sqrt(form) - 1) times the minor semi-axis
    let lower = (form.sqrt() - 1.0) * lmin.sqrt();
    if lower >= REFINE_DISTANCE {
        return (true, lower);
    }
    // distance = max over unit v of -(v.p + sqrt(v' A v))
    let neg_support = |t: f64| {
        let (s, c) = t.sin_cos();
        -(c * px + s * py) - (a11 * c * c + 2.0 * a12 * c * s + a22 * s * s).sqrt()
    };
    const SAMPLES: usize = 64;
    let step = std::f64::consts::TAU / SAMPLES as f64;
    let (mut best_t, mut best) = (0.0, f64::NEG_INFINITY);
    for k in 0..SAMPLES {
        let t = k as f64 * step;
        let v = neg_support(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    let (mut lo, mut hi) = (best_t - step, best_t + step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..40 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if neg_support(m1) < neg_support(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    best = best.max(neg_support(0.5 * (lo + hi)));
    (true, best.max(f64::MIN_POSITIVE))
}

/// `F(delta)`: robust stability of the family over `Q` at `delta`.
///
/// An empty `Q(delta)` is vacuously robust and certified.
pub fn indicator_f(
    map: &CoefficientMap,
    set: &UncertaintySet,
    delta: &[f64],
    method: RobustMethod,
) -> Result<Verdict, RobustError> {
    if delta.len() != map.m() {
        return Err(RobustError::DimensionMismatch(format!(
            "delta has length {}, map expects {}",
            delta.len(),
            map.m()
        )));
    }
    let resolved = set.resolve(Some(delta))?;
    indicator_resolved(map, &resolved, delta, method)
}

/// [`indicator_f`] on a set already resolved at `delta`.
pub fn indicator_resolved(
    map: &CoefficientMap,
    set: &ResolvedSet,
    delta: &[f64],
    method: RobustMethod,
) -> Result<Verdict, RobustError> {
    method.validate()?;
    let certified = |robust| Verdict {
        robust,
        guarantee: Guarantee::Certified,
    };
    if matches!(set, ResolvedSet::Empty) {
        return Ok(certified(true));
    }
    let set_dim = match set {
        ResolvedSet::Box { lo, .. } => lo.len(),
        ResolvedSet::AxisEllipsoid { weights, .. } => weights.len(),
        ResolvedSet::Discrete { points } => points[0].len(),
        ResolvedSet::Empty => unreachable!(),
    };
    if set_dim != map.n() {
        return Err(RobustError::DimensionMismatch(format!(
            "set has dimension {set_dim}, map expects {}",
            map.n()
        )));
    }
    let exhaustive = |points: Vec<Vec<f64>>| -> Result<bool, RobustError> {
        for q in points {
            if !map.is_stable_at(&q, delta)? {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let finite = matches!(set, ResolvedSet::Discrete { .. }) || set.is_single_point();

    match method {
        RobustMethod::Auto => {
            if finite {
                return Ok(certified(exhaustive(set.grid(2))?));
            }
            if !map.depends_on_q() {
                let q = set.center().expect("non-empty");
                return Ok(certified(map.is_stable_at(&q, delta)?));
            }
            if map.kind() == StabilityKind::Hurwitz && map.affine().is_some() {
                if map.is_interval_family() && matches!(set, ResolvedSet::Box { .. }) {
                    return indicator_resolved(map, set, delta, RobustMethod::Kharitonov);
                }
                return indicator_resolved(
                    map,
                    set,
                    delta,
                    RobustMethod::ZeroExclusion {
                        omega_max: None,
                        omega_points: DEFAULT_OMEGA_POINTS,
                    },
                );
            }
            indicator_resolved(
                map,
                set,
                delta,
                RobustMethod::GridFallback {
                    resolution: DEFAULT_GRID_RESOLUTION,
                },
            )
        }
        RobustMethod::Kharitonov => {
            if map.kind() != StabilityKind::Hurwitz {
                return Err(RobustError::MethodInapplicable(
                    "Kharitonov's theorem has no discrete-time counterpart".into(),
                ));
            }
            let exact_box = (map.is_interval_family() && matches!(set, ResolvedSet::Box { .. }))
                || !map.depends_on_q()
                || set.is_single_point();
            if !exact_box {
                return Err(RobustError::MethodInapplicable(
                    "Kharitonov needs an interval family: affine coefficients over a box, \
                     each q-variable in at most one coefficient"
                        .into(),
                ));
            }
            let (ranges, _) = coefficient_ranges(map, set, delta, 2)?.expect("non-empty");
            Ok(certified(kharitonov_hurwitz(&ranges)?))
        }
        RobustMethod::ZeroExclusion {
            omega_max,
            omega_points,
        } => {
            let out = zero_exclusion_sweep(map, set, delta, omega_max, omega_points)?;
            Ok(certified(out.robust))
        }
        RobustMethod::GridFallback { resolution } => {
            let robust = exhaustive(set.grid(resolution))?;
            Ok(Verdict {
                robust,
                guarantee: if finite || !map.depends_on_q() {
                    Guarantee::Certified
                } else {
                    Guarantee::Sampled
                },
            })
        }
    }
}

/// Coefficient-sign test: every coefficient strictly of one sign throughout
/// `Q`. Necessary for robust Hurwitz stability.
pub fn necessary_indicator(map: &CoefficientMap, set: &UncertaintySet, delta: &[f64]) -> Result<bool, RobustError> {
    if map.kind() != StabilityKind::Hurwitz {
        return Err(RobustError::MethodInapplicable(
            "coefficient positivity is a Hurwitz criterion".into(),
        ));
    }
    let resolved = set.resolve(Some(delta))?;
    if matches!(resolved, ResolvedSet::Empty) {
        return Ok(true);
    }
    if let Some(aff) = map.affine_at(delta)? {
        if let Some(r) = aff.ranges(&resolved) {
            return Ok(r.iter().all(|&(lo, _)| lo > 0.0) || r.iter().all(|&(_, hi)| hi < 0.0));
        }
    }
    for q in resolved.grid(DEFAULT_GRID_RESOLUTION) {
        let c = map.eval_coeffs(&q, delta)?;
        if !(c.iter().all(|&x| x > 0.0) || c.iter().all(|&x| x < 0.0)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Kharitonov test on the componentwise coefficient hull of the family over
/// `Q`. Sufficient for robust Hurwitz stability when the hull is exact.
pub fn sufficient_indicator(map: &CoefficientMap, set: &UncertaintySet, delta: &[f64]) -> Result<bool, RobustError> {
    if map.kind() != StabilityKind::Hurwitz {
        return Err(RobustError::MethodInapplicable(
            "Kharitonov's theorem has no discrete-time counterpart".into(),
        ));
    }
    let resolved = set.resolve(Some(delta))?;
    match coefficient_ranges(map, &resolved, delta, DEFAULT_GRID_RESOLUTION)? {
        None => Ok(true),
        Some((ranges, _)) => kharitonov_hurwitz(&ranges),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn abs_cubic() -> CoefficientMap {
        CoefficientMap::parse_descending(StabilityKind::Hurwitz, 1, 1, &["1", "2 - abs(q1 - d1)", "2", "3"]).unwrap()
    }

    fn two_dim_map() -> CoefficientMap {
        CoefficientMap::parse_descending(
            StabilityKind::Hurwitz,
            2,
            2,
            &["0.7 + q1", "5.5 + q2 + d1", "-1 + d2 - 15*d1", "-15*d2"],
        )
        .unwrap()
    }

    fn ellipse() -> UncertaintySet {
        UncertaintySet::AxisEllipsoid {
            weights: vec![100.0, 25.0],
            center: vec![0.0, 0.0],
            bound: 9.0,
        }
    }

    fn interval(lo: f64, hi: f64) -> UncertaintySet {
        UncertaintySet::Box { lo: vec![lo], hi: vec![hi] }
    }

    /// Closed form for the two-dimensional example: robust iff
    /// `a2 a1 - a3 a0 > 0` for all q in the ellipse, i.e. its centre value
    /// exceeds the ellipse support `3 sqrt(a1^2/25 + a0^2/100)`.
    fn two_dim_closed_form(d1: f64, d2: f64) -> f64 {
        let a0 = -15.0 * d2;
        let a1 = -1.0 + d2 - 15.0 * d1;
        (5.5 + d1) * a1 - 0.7 * a0 - 3.0 * (a1 * a1 / 25.0 + a0 * a0 / 100.0).sqrt()
    }

    #[test]
    fn abs_cubic_indicator() {
        let map = abs_cubic();
        let q = interval(1.0, 1.5);
        let v = indicator_f(&map, &q, &[1.25], RobustMethod::Auto).unwrap();
        assert!(v.robust);
        assert_eq!(v.guarantee, Guarantee::Sampled);
        assert!(!indicator_f(&map, &q, &[0.4], RobustMethod::Auto).unwrap().robust);
    }

    #[test]
    fn two_dim_interior_point() {
        let map = two_dim_map();
        let delta = [-3.0, -4.5];
        assert!(two_dim_closed_form(delta[0], delta[1]) > 0.0);
        let v = indicator_f(&map, &ellipse(), &delta, RobustMethod::Auto).unwrap();
        assert_eq!(v, Verdict { robust: true, guarantee: Guarantee::Certified });
        // fine grid oracle over the ellipse
        let grid = indicator_f(&map, &ellipse(), &delta, RobustMethod::GridFallback { resolution: 81 }).unwrap();
        assert!(grid.robust);
    }

    #[test]
    fn kharitonov_examples() {
        let point = |c: &[f64]| c.iter().map(|&x| (x, x)).collect::<Vec<_>>();
        assert!(kharitonov_hurwitz(&point(&[3.0, 2.0, 2.0, 1.0])).unwrap());
        assert!(!kharitonov_hurwitz(&point(&[3.0, 2.0, 0.1, 1.0])).unwrap());
        assert!(kharitonov_hurwitz(&[(1.0, 2.0), (1.0, 0.5)]).is_err());
        // leading interval straddling zero
        assert!(!kharitonov_hurwitz(&[(1.0, 2.0), (-0.5, 0.5)]).unwrap());
        // negative leading interval is normalized
        assert!(kharitonov_hurwitz(&[(-2.0, -1.0), (-2.0, -1.0)]).unwrap());
    }

    #[test]
    fn kharitonov_rejects_schur() {
        let map = CoefficientMap::parse_descending(StabilityKind::Schur, 1, 0, &["1", "q1"]).unwrap();
        let err = indicator_f(&map, &interval(0.0, 0.5), &[], RobustMethod::Kharitonov).unwrap_err();
        assert!(matches!(err, RobustError::MethodInapplicable(_)));
        assert!(sufficient_indicator(&map, &interval(0.0, 0.5), &[]).is_err());
        assert!(necessary_indicator(&map, &interval(0.0, 0.5), &[]).is_err());
    }

    #[test]
    fn kharitonov_on_point_polynomials_matches_routh() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..1000 {
            let deg = rng.random_range(1..=6);
            let c: Vec<f64> = (0..=deg).map(|_| rng.random_range(-1.0..5.0)).collect();
            let iv: Vec<(f64, f64)> = c.iter().map(|&x| (x, x)).collect();
            assert_eq!(kharitonov_hurwitz(&iv).unwrap(), Polynomial::new(c.clone()).is_hurwitz().unwrap(), "{c:?}");
        }
    }

    #[test]
    fn zero_exclusion_on_a_point_equals_hurwitz() {
        let map = two_dim_map();
        for (d1, d2) in [(-3.0, -4.5), (-2.0, -7.0), (-4.0, -2.0), (-2.1, -6.9)] {
            let set = UncertaintySet::Box { lo: vec![0.1, -0.2], hi: vec![0.1, -0.2] };
            let got = zero_exclusion_affine(&map, &set, &[d1, d2], None, 1024).unwrap();
            let want = map.polynomial(&[0.1, -0.2], &[d1, d2]).unwrap().is_hurwitz().unwrap();
            assert_eq!(got, want, "({d1}, {d2})");
        }
    }

    #[test]
    fn zero_exclusion_outside_robust_region() {
        let map = two_dim_map();
        // nominally stable (dashed boundary) but outside the robust region
        let nominal = |d1: f64, d2: f64| (5.5 + d1) * (-1.0 + d2 - 15.0 * d1) - 0.7 * (-15.0 * d2);
        let (d1, d2) = (-4.0, -6.5);
        assert!(nominal(d1, d2) > 0.0);
        assert!(two_dim_closed_form(d1, d2) < -0.5);
        assert!(!zero_exclusion_affine(&map, &ellipse(), &[d1, d2], None, 1024).unwrap());
        assert!(map.is_stable_at(&[0.0, 0.0], &[d1, d2]).unwrap());
    }

    #[test]
    fn zero_exclusion_matches_closed_form_away_from_boundary() {
        let map = two_dim_map();
        for i in 0..=20 {
            for j in 0..=20 {
                let d1 = -4.0 + 2.0 * i as f64 / 20.0;
                let d2 = -7.0 + 5.0 * j as f64 / 20.0;
                let cf = two_dim_closed_form(d1, d2);
                if cf.abs() < 1e-2 {
                    continue;
                }
                let got = zero_exclusion_affine(&map, &ellipse(), &[d1, d2], None, 1024).unwrap();
                assert_eq!(got, cf > 0.0, "({d1}, {d2}) closed form {cf}");
            }
        }
    }

    #[test]
    fn zero_exclusion_requires_structure() {
        let err = zero_exclusion_affine(&abs_cubic(), &interval(1.0, 1.5), &[1.25], None, 1024).unwrap_err();
        assert!(matches!(err, RobustError::MethodInapplicable(_)));
        let map = two_dim_map();
        let err = zero_exclusion_affine(&map, &ellipse(), &[-3.0, -4.5], None, 10).unwrap_err();
        assert!(matches!(err, RobustError::MethodInapplicable(_)));
    }

    #[test]
    fn bound_indicators() {
        let map = CoefficientMap::parse_descending(StabilityKind::Hurwitz, 1, 0, &["1", "q1", "-1"]).unwrap();
        assert!(!necessary_indicator(&map, &interval(1.0, 2.0), &[]).unwrap());

        let map = abs_cubic();
        let q = interval(1.0, 1.5);
        assert!(sufficient_indicator(&map, &q, &[1.25]).unwrap());
        assert!(necessary_indicator(&map, &q, &[1.25]).unwrap());
        let ranges = coefficient_ranges(&map, &q.resolve(None).unwrap(), &[1.25], 41).unwrap().unwrap().0;
        assert_eq!(ranges[2], (1.75, 2.0));
    }

    #[test]
    fn empty_set_is_vacuously_robust() {
        let pb = UncertaintySet::ParamBox {
            lo: vec![Expression::parse("1 - d1/3", 0, 1).unwrap()],
            hi: vec![Expression::parse("2 - d1", 0, 1).unwrap()],
        };
        let v = indicator_f(&abs_cubic(), &pb, &[1.6], RobustMethod::Auto).unwrap();
        assert_eq!(v, Verdict { robust: true, guarantee: Guarantee::Certified });
    }

    #[test]
    fn monotone_in_q() {
        let map = abs_cubic();
        for k in 0..60 {
            let d = k as f64 * 0.05;
            let inner = indicator_f(&map, &interval(1.1, 1.3), &[d], RobustMethod::Auto).unwrap().robust;
            let outer = indicator_f(&map, &interval(1.0, 1.5), &[d], RobustMethod::Auto).unwrap().robust;
            assert!(!outer || inner, "delta {d}");
        }
    }

    #[test]
    fn degree_drop_is_unstable() {
        let map = CoefficientMap::parse_descending(StabilityKind::Hurwitz, 1, 0, &["q1", "1"]).unwrap();
        assert!(!map.is_stable_at(&[0.0], &[]).unwrap());
        assert!(map.is_stable_at(&[1.0], &[]).unwrap());
        assert!(!indicator_f(&map, &interval(-0.5, 1.0), &[], RobustMethod::Auto).unwrap().robust);
    }

    #[test]
    fn zonotope_geometry() {
        let c = Complex64::new(0.0, 0.0);
        let g = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        assert!(!zonotope_excludes_origin(c, &g).0);
        let (ex, d) = zonotope_excludes_origin(Complex64::new(3.0, 0.0), &g);
        assert!(ex && (d - 2.0).abs() < 1e-12);
        // collinear generators, origin on the line but beyond the segment
        let (ex, d) = zonotope_excludes_origin(Complex64::new(3.0, 0.0), &[Complex64::new(1.0, 0.0)]);
        assert!(ex && (d - 2.0).abs() < 1e-12);
        let (ex, _) = zonotope_excludes_origin(Complex64::new(0.5, 0.0), &[Complex64::new(1.0, 0.0)]);
        assert!(!ex);
    }

    #[test]
    fn ellipse_geometry() {
        // unit circle centred at (3, 0)
        let cols = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        let (ex, d) = ellipse_excludes_origin(Complex64::new(3.0, 0.0), &cols);
        assert!(ex && (d - 2.0).abs() < 1e-9, "{d}");
        assert!(!ellipse_excludes_origin(Complex64::new(0.5, 0.5), &cols).0);
        // degenerate: segment of half-length 1 along the real axis
        let cols = [Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)];
        assert!(!ellipse_excludes_origin(Complex64::new(0.9, 0.0), &cols).0);
        assert!(ellipse_excludes_origin(Complex64::new(1.1, 0.0), &cols).0);
    }
}
