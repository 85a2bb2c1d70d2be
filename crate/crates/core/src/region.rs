//! Robust D-partition in delta-space.
//!
//! One random parameter: scan `F(delta)` on a uniform grid and bisect every
//! sign change, giving a union of intervals whose probability is a sum of CDF
//! differences. Two random parameters: classify an `R x R` cell grid (corners
//! and centre), subdivide disagreeing cells, and trace the boundary with
//! marching squares. Committed cells give a certified bracket on the measure;
//! the polygons are for export and plotting.

use std::collections::HashMap;
use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::estimate::{EstimateMethod, ProbabilityEstimate};
use crate::param::{Distribution, Marginal, UncertaintySet};
use crate::robust::{indicator_f, CoefficientMap, Guarantee, RobustError, RobustMethod};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid region parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate polygon with {vertices} vertices")]
    DegeneratePolygon { vertices: usize },
    #[error(transparent)]
    Robust(#[from] RobustError),
}

/// Sorted, disjoint half-open intervals `(a, b]`. Ends may be infinite.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalUnion {
    intervals: Vec<(f64, f64)>,
}

impl IntervalUnion {
    /// Sorts and merges overlapping or touching intervals; empty ones are dropped.
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self, RegionError> {
        if intervals.iter().any(|(a, b)| a.is_nan() || b.is_nan()) {
            return Err(RegionError::InvalidParams("NaN interval endpoint".into()));
        }
        intervals.retain(|(a, b)| a < b);
        intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(intervals.len());
        for (a, b) in intervals {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Ok(Self { intervals: merged })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a < x && x <= b)
    }

    pub fn length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}

/// Output of [`stability_intervals_1d`].
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityIntervals {
    pub union: IntervalUnion,
    pub search: (f64, f64),
    /// Scan step; features of `F` narrower than this may be missed.
    pub step: f64,
    pub tol: f64,
    pub guarantee: Guarantee,
}

/// Axis-aligned cell `[x0, x1] x [y0, y1]`.
pub type Rect = [f64; 4];

/// Mass of the classification grid as fractions of the bounding rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBracket {
    pub inside_mass: f64,
    pub boundary_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonRegion {
    /// Stable region on the left of every edge: outer boundaries
    /// counterclockwise, holes clockwise.
    pub polygons: Vec<Vec<[f64; 2]>>,
    pub bounds: [(f64, f64); 2],
    pub resolution: usize,
    pub refine_depth: usize,
    /// Committed stable cells, at whatever refinement level they settled.
    pub inside_cells: Vec<Rect>,
    /// Cells still mixed at the finest level.
    pub boundary_cells: Vec<Rect>,
    pub cell_bracket: CellBracket,
    pub guarantee: Guarantee,
}

impl PolygonRegion {
    /// Signed area of all polygons (holes subtract).
    pub fn polygon_area(&self) -> f64 {
        self.polygons.iter().filter_map(|p| polygon_area(p).ok()).sum()
    }
}

/// Signed shoelace area: positive for counterclockwise vertex order.
pub fn polygon_area(polygon: &[[f64; 2]]) -> Result<f64, RegionError> {
    if polygon.len() < 3 {
        return Err(RegionError::DegeneratePolygon {
            vertices: polygon.len(),
        });
    }
    let n = polygon.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let [x0, y0] = polygon[i];
            let [x1, y1] = polygon[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum();
    Ok(0.5 * twice)
}

fn check_finite_range(lo: f64, hi: f64, what: &str) -> Result<(), RegionError> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(RegionError::InvalidParams(format!("{what} [{lo}, {hi}] must be finite and non-empty")));
    }
    Ok(())
}

/// Stability intervals of a one-parameter family.
///
/// Scans `F` at `lo, lo + h, ..., hi` and bisects every sign change down to
/// width `tol`; the reported endpoint is the middle of the final bracket.
pub fn stability_intervals_1d(
    map: &CoefficientMap,
    set: &UncertaintySet,
    search: (f64, f64),
    h: f64,
    tol: f64,
    method: RobustMethod,
) -> Result<StabilityIntervals, RegionError> {
    if map.m() != 1 {
        return Err(RegionError::DimensionMismatch(format!(
            "interval extraction needs one random parameter, map has {}",
            map.m()
        )));
    }
    let (lo, hi) = search;
    check_finite_range(lo, hi, "search range")?;
    if !(h > 0.0) || !(tol > 0.0) {
        return Err(RegionError::InvalidParams(format!("step {h} and tolerance {tol} must be positive")));
    }
    let f = |x: f64| indicator_f(map, set, &[x], method);
    let steps = ((hi - lo) / h).ceil().max(1.0) as usize;
    let xs: Vec<f64> = (0..=steps)
        .map(|k| if k == steps { hi } else { lo + h * k as f64 })
        .collect();
    let verdicts = xs.par_iter().map(|&x| f(x)).collect::<Result<Vec<_>, _>>()?;
    let mut guarantee = verdicts.iter().fold(Guarantee::Certified, |g, v| g.and(v.guarantee));

    let crossings = (0..steps)
        .filter(|&k| verdicts[k].robust != verdicts[k + 1].robust)
        .collect::<Vec<_>>();
    let located = crossings
        .par_iter()
        .map(|&k| {
            let (mut a, mut b) = (xs[k], xs[k + 1]);
            let left = verdicts[k].robust;
            let mut g = Guarantee::Certified;
            while b - a > tol {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                let v = f(mid)?;
                g = g.and(v.guarantee);
                if v.robust == left {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            Ok((k, 0.5 * (a + b), g))
        })
        .collect::<Result<Vec<_>, RobustError>>()?;

    let mut intervals = Vec::new();
    let mut start = verdicts[0].robust.then_some(lo);
    for (k, x, g) in located {
        guarantee = guarantee.and(g);
        if verdicts[k].robust {
            intervals.push((start.take().expect("open interval"), x));
        } else {
            start = Some(x);
        }
    }
    if let Some(a) = start {
        intervals.push((a, hi));
    }
    Ok(StabilityIntervals {
        union: IntervalUnion::new(intervals)?,
        search,
        step: h,
        tol,
        guarantee,
    })
}

/// Robust stability region of a two-parameter family over `bounds`.
///
/// Each of the `R x R` cells is classified by its four corners and centre;
/// a cell with unanimous samples is committed, otherwise it is split into
/// four and re-examined, `refine_depth` times at most.
pub fn stability_region_2d(
    map: &CoefficientMap,
    set: &UncertaintySet,
    bounds: [(f64, f64); 2],
    resolution: usize,
    refine_depth: usize,
    method: RobustMethod,
) -> Result<PolygonRegion, RegionError> {
    if map.m() != 2 {
        return Err(RegionError::DimensionMismatch(format!(
            "region extraction needs two random parameters, map has {}",
            map.m()
        )));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        check_finite_range(lo, hi, &format!("bounds of delta{}", i + 1))?;
    }
    if resolution < 16 {
        return Err(RegionError::InvalidParams(format!("resolution must be at least 16, got {resolution}")));
    }
    if refine_depth > 12 {
        return Err(RegionError::InvalidParams(format!("refine_depth {refine_depth} is unreasonably deep")));
    }
    let r = resolution;
    let [(x0, x1), (y0, y1)] = bounds;
    let hx = (x1 - x0) / r as f64;
    let hy = (y1 - y0) / r as f64;
    let gx = |i: usize| if i == r { x1 } else { x0 + hx * i as f64 };
    let gy = |j: usize| if j == r { y1 } else { y0 + hy * j as f64 };
    let f = |x: f64, y: f64| indicator_f(map, set, &[x, y], method);

    // nodes row-major by j, then cell centres
    let nodes = (0..(r + 1) * (r + 1))
        .into_par_iter()
        .map(|k| f(gx(k % (r + 1)), gy(k / (r + 1))))
        .collect::<Result<Vec<_>, _>>()?;
    let centers = (0..r * r)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % r, k / r);
            f(0.5 * (gx(i) + gx(i + 1)), 0.5 * (gy(j) + gy(j + 1)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut guarantee = nodes
        .iter()
        .chain(&centers)
        .fold(Guarantee::Certified, |g, v| g.and(v.guarantee));
    let node = |i: usize, j: usize| nodes[j * (r + 1) + i].robust;

    let mut inside_cells = Vec::new();
    let mut mixed = Vec::new();
    for j in 0..r {
        for i in 0..r {
            let corners = [node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)];
            let c = centers[j * r + i].robust;
            let rect = [gx(i), gx(i + 1), gy(j), gy(j + 1)];
            if corners.iter().all(|&v| v == c) {
                if c {
                    inside_cells.push(rect);
                }
            } else {
                mixed.push((rect, corners, c));
            }
        }
    }
    let refined = mixed
        .par_iter()
        .map(|&(rect, corners, c)| {
            let mut out = Refined {
                inside: Vec::new(),
                boundary: Vec::new(),
                guarantee: Guarantee::Certified,
            };
            refine_cell(&f, rect, corners, c, refine_depth, &mut out)?;
            Ok(out)
        })
        .collect::<Result<Vec<_>, RobustError>>()?;
    let mut boundary_cells = Vec::new();
    for out in refined {
        guarantee = guarantee.and(out.guarantee);
        inside_cells.extend(out.inside);
        boundary_cells.extend(out.boundary);
    }

    let area = (x1 - x0) * (y1 - y0);
    let rect_area = |c: &Rect| (c[1] - c[0]) * (c[3] - c[2]);
    let cell_bracket = CellBracket {
        inside_mass: inside_cells.iter().map(rect_area).sum::<f64>() / area,
        boundary_mass: boundary_cells.iter().map(rect_area).sum::<f64>() / area,
    };

    let (polygons, g) = trace_polygons(&f, r, &node, &|i, j| centers[j * r + i].robust, gx, gy, refine_depth)?;
    guarantee = guarantee.and(g);

    Ok(PolygonRegion {
        polygons,
        bounds,
        resolution,
        refine_depth,
        inside_cells,
        boundary_cells,
        cell_bracket,
        guarantee,
    })
}

struct Refined {
    inside: Vec<Rect>,
    boundary: Vec<Rect>,
    guarantee: Guarantee,
}

fn refine_cell<F>(
    f: &F,
    rect: Rect,
    corners: [bool; 4],
    center: bool,
    depth: usize,
    out: &mut Refined,
) -> Result<(), RobustError>
where
    F: Fn(f64, f64) -> Result<crate::robust::Verdict, RobustError>,
{
    if corners.iter().all(|&v| v == center) {
        if center {
            out.inside.push(rect);
        }
        return Ok(());
    }
    if depth == 0 {
        out.boundary.push(rect);
        return Ok(());
    }
    let [x0, x1, y0, y1] = rect;
    let (xm, ym) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let mut eval = |x, y| -> Result<bool, RobustError> {
        let v = f(x, y)?;
        out.guarantee = out.guarantee.and(v.guarantee);
        Ok(v.robust)
    };
    let bottom = eval(xm, y0)?;
    let right = eval(x1, ym)?;
    let top = eval(xm, y1)?;
    let left = eval(x0, ym)?;
    let [bl, br, tr, tl] = corners;
    let subs = [
        ([x0, xm, y0, ym], [bl, bottom, center, left]),
        ([xm, x1, y0, ym], [bottom, br, right, center]),
        ([xm, x1, ym, y1], [center, right, tr, top]),
        ([x0, xm, ym, y1], [left, center, top, tl]),
    ];
    let mut mids = [false; 4];
    for (m, (sub, _)) in mids.iter_mut().zip(&subs) {
        *m = eval(0.5 * (sub[0] + sub[1]), 0.5 * (sub[2] + sub[3]))?;
    }
    for ((sub, c), mid) in subs.into_iter().zip(mids) {
        refine_cell(f, sub, c, mid, depth - 1, out)?;
    }
    Ok(())
}

// Grid edges keyed by their lower-left node in padded coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum EdgeKey {
    H(usize, usize),
    V(usize, usize),
}

/// Marching squares over the base node grid, padded by one ring of
/// unstable nodes so every contour closes along the bounds.
#[allow(clippy::too_many_arguments)]
fn trace_polygons<F, N, C, GX, GY>(
    f: &F,
    r: usize,
    node: &N,
    center: &C,
    gx: GX,
    gy: GY,
    refine_depth: usize,
) -> Result<(Vec<Vec<[f64; 2]>>, Guarantee), RobustError>
where
    F: Fn(f64, f64) -> Result<crate::robust::Verdict, RobustError> + Sync,
    N: Fn(usize, usize) -> bool,
    C: Fn(usize, usize) -> bool,
    GX: Fn(usize) -> f64 + Sync,
    GY: Fn(usize) -> f64 + Sync,
{
    // padded index p in 0..=r+2 maps to node p-1; pads are unstable
    let w = r + 3;
    let padded: Vec<bool> = (0..w * w)
        .map(|k| {
            let (p, q) = (k % w, k / w);
            p >= 1 && q >= 1 && p <= r + 1 && q <= r + 1 && node(p - 1, q - 1)
        })
        .collect();
    let pn = |p: usize, q: usize| padded[q * w + p];
    let px = |p: usize| gx(p.saturating_sub(1).min(r));
    let py = |q: usize| gy(q.saturating_sub(1).min(r));
    let interior = |p: usize, q: usize| p >= 1 && q >= 1 && p <= r + 1 && q <= r + 1;

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for q in 0..=r + 1 {
        for p in 0..=r + 1 {
            let c = [pn(p, q), pn(p + 1, q), pn(p + 1, q + 1), pn(p, q + 1)];
            if c.iter().all(|&v| v == c[0]) {
                continue;
            }
            let edges = [EdgeKey::H(p, q), EdgeKey::V(p + 1, q), EdgeKey::H(p, q + 1), EdgeKey::V(p, q)];
            // crossings in counterclockwise order, flagged in->out
            let crossings: Vec<(EdgeKey, bool)> = (0..4)
                .filter(|&k| c[k] != c[(k + 1) % 4])
                .map(|k| (edges[k], c[k]))
                .collect();
            let saddle_inside = crossings.len() == 4 && interior(p, q) && p <= r && q <= r && center(p - 1, q - 1);
            let n = crossings.len();
            for k in 0..n {
                let (e, in_out) = crossings[k];
                if !in_out {
                    continue;
                }
                let partner = if saddle_inside { (k + 1) % n } else { (k + n - 1) % n };
                segments.push((e, crossings[partner].0));
            }
        }
    }

    // vertex positions: bisect interior crossings, pin padded ones to the bounds
    let mut keys: Vec<EdgeKey> = segments.iter().flat_map(|&(a, b)| [a, b]).collect();
    keys.sort();
    keys.dedup();
    let iters = refine_depth + 1;
    let located = keys
        .par_iter()
        .map(|&key| {
            let (p0, q0, p1, q1) = match key {
                EdgeKey::H(p, q) => (p, q, p + 1, q),
                EdgeKey::V(p, q) => (p, q, p, q + 1),
            };
            let (mut a, mut b) = ([px(p0), py(q0)], [px(p1), py(q1)]);
            let mut g = Guarantee::Certified;
            if interior(p0, q0) && interior(p1, q1) {
                let va = pn(p0, q0);
                for _ in 0..iters {
                    let m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                    let v = f(m[0], m[1])?;
                    g = g.and(v.guarantee);
                    if v.robust == va {
                        a = m;
                    } else {
                        b = m;
                    }
                }
            }
            Ok((key, [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])], g))
        })
        .collect::<Result<Vec<_>, RobustError>>()?;
    let mut guarantee = Guarantee::Certified;
    let mut position: HashMap<EdgeKey, [f64; 2]> = HashMap::with_capacity(located.len());
    for (k, v, g) in located {
        guarantee = guarantee.and(g);
        position.insert(k, v);
    }

    let mut next: HashMap<EdgeKey, EdgeKey> = segments.iter().copied().collect();
    let mut starts: Vec<EdgeKey> = segments.iter().map(|s| s.0).collect();
    starts.sort();
    let mut polygons = Vec::new();
    for s in starts {
        let Some(mut cur) = next.remove(&s) else {
            continue;
        };
        let mut poly = vec![position[&s]];
        while cur != s {
            poly.push(position[&cur]);
            match next.remove(&cur) {
                Some(n) => cur = n,
                None => break,
            }
        }
        poly.dedup();
        while poly.len() > 1 && poly.first() == poly.last() {
            poly.pop();
        }
        let poly = drop_collinear(poly);
        if poly.len() >= 3 {
            polygons.push(poly);
        }
    }
    Ok((polygons, guarantee))
}

fn drop_collinear(poly: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    let n = poly.len();
    if n < 4 {
        return poly;
    }
    (0..n)
        .filter(|&i| {
            let a = poly[(i + n - 1) % n];
            let b = poly[i];
            let c = poly[(i + 1) % n];
            // only exact axis-aligned runs along the bounds
            !((a[0] == b[0] && b[0] == c[0]) || (a[1] == b[1] && b[1] == c[1]))
        })
        .map(|i| poly[i])
        .collect()
}

/// Region over which a probability is taken.
#[derive(Debug, Clone, Copy)]
pub enum RegionRef<'a> {
    Intervals(&'a IntervalUnion),
    Polygons(&'a PolygonRegion),
}

impl<'a> From<&'a IntervalUnion> for RegionRef<'a> {
    fn from(u: &'a IntervalUnion) -> Self {
        RegionRef::Intervals(u)
    }
}

impl<'a> From<&'a StabilityIntervals> for RegionRef<'a> {
    fn from(s: &'a StabilityIntervals) -> Self {
        RegionRef::Intervals(&s.union)
    }
}

impl<'a> From<&'a PolygonRegion> for RegionRef<'a> {
    fn from(p: &'a PolygonRegion) -> Self {
        RegionRef::Polygons(p)
    }
}

/// Probability of the region under a product law.
///
/// Intervals: exact sum of CDF differences. Polygon regions: product-marginal
/// mass of committed stable cells, bracketed by adding the unresolved
/// boundary cells and any mass outside the classified rectangle.
pub fn measure<'a>(region: impl Into<RegionRef<'a>>, dist: &Distribution) -> Result<ProbabilityEstimate, RegionError> {
    match region.into() {
        RegionRef::Intervals(u) => {
            if dist.dim() != 1 {
                return Err(RegionError::DimensionMismatch(format!(
                    "interval region needs a one-dimensional law, got {}",
                    dist.dim()
                )));
            }
            let m = &dist.marginals[0];
            let p: f64 = u.intervals().iter().map(|&(a, b)| m.mass(a, b)).sum();
            Ok(ProbabilityEstimate::exact(p, EstimateMethod::ExactCdf, Guarantee::Certified))
        }
        RegionRef::Polygons(region) => {
            if dist.dim() != 2 {
                return Err(RegionError::DimensionMismatch(format!(
                    "polygon region needs a two-dimensional law, got {}",
                    dist.dim()
                )));
            }
            let mass = |c: &Rect| dist.box_mass(&[c[0], c[2]], &[c[1], c[3]]);
            let inside: f64 = region.inside_cells.iter().map(mass).sum();
            let boundary: f64 = region.boundary_cells.iter().map(mass).sum();
            let [(x0, x1), (y0, y1)] = region.bounds;
            let outside = (1.0 - dist.box_mass(&[x0, y0], &[x1, y1])).max(0.0);
            let uniform = dist.marginals.iter().all(|m| matches!(m, Marginal::Uniform { .. }));
            let method = if uniform {
                EstimateMethod::Geometric
            } else {
                EstimateMethod::Quadrature
            };
            Ok(ProbabilityEstimate::bracketed(
                inside,
                inside + boundary + outside,
                method,
                Guarantee::Certified,
            ))
        }
    }
}

/// CSV with columns `interval_id,a,b`.
pub fn write_intervals_csv<W: Write>(union: &IntervalUnion, mut w: W) -> io::Result<()> {
    writeln!(w, "interval_id,a,b")?;
    for (i, (a, b)) in union.intervals().iter().enumerate() {
        writeln!(w, "{i},{a},{b}")?;
    }
    Ok(())
}

/// CSV with columns `polygon_id,vertex_index,delta1,delta2`.
pub fn write_polygons_csv<W: Write>(region: &PolygonRegion, mut w: W) -> io::Result<()> {
    writeln!(w, "polygon_id,vertex_index,delta1,delta2")?;
    for (i, poly) in region.polygons.iter().enumerate() {
        for (k, [x, y]) in poly.iter().enumerate() {
            writeln!(w, "{i},{k},{x},{y}")?;
        }
    }
    Ok(())
}
