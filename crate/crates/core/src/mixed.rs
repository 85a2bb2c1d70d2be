//! Probability of robust stability with deterministic and random parameters.
//!
//! Three problems share a [`ProblemSpec`]:
//!
//! * `QDelta`: `P[delta : stable for all q in Q]`;
//! * `QofDelta`: as above with a delta-dependent set `Q(delta)`;
//! * `DeltaOfQ`: `min over q in Q of P[delta : stable at (q, delta)]` where the law
//!   of delta may depend on q.
//!
//! The first two are solved by region extraction followed by an exact or
//! bracketed measure (two-step), or by scenario sampling; the third by a
//! refined grid over `Q`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimate::{Certificate, EstimateMethod, ProbabilityEstimate};
use crate::expr::Expression;
use crate::param::{linspace, tensor, Distribution, DistributionSpec, Marginal, ParamError, ResolvedSet, UncertaintySet};
use crate::region::{measure, stability_intervals_1d, stability_region_2d, PolygonRegion, RegionError, StabilityIntervals};
use crate::robust::{indicator_f, indicator_resolved, CoefficientMap, Guarantee, RobustError, RobustMethod, Verdict};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixedError {
    #[error("invalid problem: {0}")]
    InvalidSpec(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("{m} random parameters exceed the region pipeline limit of {max}")]
    DimensionTooHigh { m: usize, max: usize },
    #[error("not a discrete problem: {0}")]
    NotDiscrete(String),
    #[error("unbounded support: {0}")]
    UnboundedSupport(String),
    #[error(transparent)]
    Robust(#[from] RobustError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Param(#[from] ParamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    QDelta,
    #[serde(rename = "q_of_delta")]
    QofDelta,
    DeltaOfQ,
}

/// A validated mixed-robustness problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    map: CoefficientMap,
    q_set: UncertaintySet,
    delta_dist: DistributionSpec,
    problem: ProblemKind,
}

impl ProblemSpec {
    pub fn new(
        map: CoefficientMap,
        q_set: UncertaintySet,
        delta_dist: DistributionSpec,
        problem: ProblemKind,
    ) -> Result<Self, MixedError> {
        q_set.validate()?;
        let bad = |s: String| Err(MixedError::InvalidSpec(s));
        if q_set.dim() != map.n() {
            return bad(format!("q-set has dimension {}, polynomial uses n = {}", q_set.dim(), map.n()));
        }
        if delta_dist.dim() != map.m() {
            return bad(format!(
                "distribution has {} components, polynomial uses m = {}",
                delta_dist.dim(),
                map.m()
            ));
        }
        if let UncertaintySet::ParamBox { lo, hi } = &q_set {
            if let Some(e) = lo.iter().chain(hi).find(|e| e.dims() != (0, map.m())) {
                return bad(format!("set bound `{}` must be declared over m = {} d-variables", e.source(), map.m()));
            }
        }
        match problem {
            ProblemKind::QDelta if q_set.is_parameterized() || delta_dist.is_q_dependent() => {
                return bad("q_delta needs a fixed set and a q-independent distribution".into())
            }
            ProblemKind::QofDelta if delta_dist.is_q_dependent() => {
                return bad("q_of_delta needs a q-independent distribution".into())
            }
            ProblemKind::DeltaOfQ if q_set.is_parameterized() => {
                return bad("delta_of_q needs a fixed q-set".into())
            }
            _ => {}
        }
        if !delta_dist.is_q_dependent() {
            delta_dist.resolve(None)?;
        }
        Ok(Self {
            map,
            q_set,
            delta_dist,
            problem,
        })
    }

    pub fn map(&self) -> &CoefficientMap {
        &self.map
    }

    pub fn q_set(&self) -> &UncertaintySet {
        &self.q_set
    }

    pub fn delta_dist(&self) -> &DistributionSpec {
        &self.delta_dist
    }

    pub fn problem(&self) -> ProblemKind {
        self.problem
    }

    fn expect(&self, kinds: &[ProblemKind], op: &str) -> Result<(), MixedError> {
        if kinds.contains(&self.problem) {
            Ok(())
        } else {
            Err(MixedError::InvalidSpec(format!("{op} does not solve {:?} problems", self.problem)))
        }
    }
}

pub const DEFAULT_TRUNCATION: f64 = 1.0 - 1e-12;
pub const DEFAULT_BOUNDS_TRUNCATION: f64 = 1.0 - 1e-9;

/// Settings of the two-step (region, then measure) pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionParams {
    /// Cells per axis in two dimensions.
    pub resolution: usize,
    pub refine_depth: usize,
    /// Scan points per unit search range in one dimension: `h = (hi - lo) / scan_steps`.
    pub scan_steps: usize,
    /// Endpoint bisection width in one dimension.
    pub tol: f64,
    /// Search rectangle; defaults to the support, truncated for unbounded laws.
    pub search: Option<Vec<(f64, f64)>>,
    /// Central mass kept when truncating unbounded marginals.
    pub truncation: f64,
    pub method: RobustMethod,
}

impl Default for RegionParams {
    fn default() -> Self {
        Self {
            resolution: 400,
            refine_depth: 2,
            scan_steps: 2000,
            tol: 1e-10,
            search: None,
            truncation: DEFAULT_TRUNCATION,
            method: RobustMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub epsilon: f64,
    pub theta: f64,
    pub seed: u64,
    /// Overrides the Chernoff sample size.
    pub samples: Option<u64>,
    pub method: RobustMethod,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            theta: 1e-7,
            seed: 0,
            samples: None,
            method: RobustMethod::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    TwoStep(RegionParams),
    Scenario(ScenarioParams),
    /// Two-step with defaults when there are at most two random parameters,
    /// otherwise scenario with defaults.
    Auto,
}

/// Chernoff (additive Hoeffding) sample size `ceil(ln(2/theta) / (2 eps^2))`,
/// at least one.
pub fn chernoff_sample_size(epsilon: f64, theta: f64) -> Result<u64, MixedError> {
    if !(epsilon > 0.0 && epsilon < 1.0) || !(theta > 0.0 && theta < 1.0) {
        return Err(MixedError::Domain(format!(
            "epsilon and theta must lie in (0, 1), got {epsilon} and {theta}"
        )));
    }
    let n = ((2.0 / theta).ln() / (2.0 * epsilon * epsilon)).ceil();
    Ok((n as u64).max(1))
}

/// Monte Carlo estimate: fraction of sampled deltas at which the family is
/// robustly stable. Deterministic for a fixed seed under any thread count.
pub fn scenario_estimate(spec: &ProblemSpec, params: &ScenarioParams) -> Result<ProbabilityEstimate, MixedError> {
    spec.expect(&[ProblemKind::QDelta, ProblemKind::QofDelta], "scenario estimation")?;
    let n = chernoff_sample_size(params.epsilon, params.theta)?;
    let samples = params.samples.unwrap_or(n);
    if samples == 0 {
        return Err(MixedError::Domain("sample count must be positive".into()));
    }
    let dist = spec.delta_dist.resolve(None)?;
    let (successes, guarantee) = (0..samples)
        .into_par_iter()
        .map(|i| {
            let delta = dist.sample_at(params.seed, i);
            let v = indicator_f(&spec.map, &spec.q_set, &delta, params.method)?;
            Ok((u64::from(v.robust), v.guarantee))
        })
        .try_reduce(
            || (0, Guarantee::Certified),
            |a, b| Ok((a.0 + b.0, a.1.and(b.1))),
        )
        .map_err(MixedError::Robust)?;
    let mut est = ProbabilityEstimate {
        value: successes as f64 / samples as f64,
        method: EstimateMethod::Scenario,
        certificate: Certificate::Scenario {
            epsilon: params.epsilon,
            theta: params.theta,
            samples,
            successes,
        },
        worst_q: None,
        guarantee,
        notes: Vec::new(),
    };
    if samples < n {
        est.notes.push(format!(
            "sample count {samples} overrides the Chernoff size {n}; the epsilon/theta certificate does not hold"
        ));
    }
    Ok(est)
}

/// `QDelta`: `P[delta : stable for every q in Q]`.
pub fn solve_q_delta(spec: &ProblemSpec, strategy: &Strategy) -> Result<ProbabilityEstimate, MixedError> {
    spec.expect(&[ProblemKind::QDelta], "solve_q_delta")?;
    solve_fixed_or_parameterized(spec, strategy)
}

/// `QofDelta`: `P[delta : stable for every q in Q(delta)]`.
pub fn solve_q_of_delta(spec: &ProblemSpec, strategy: &Strategy) -> Result<ProbabilityEstimate, MixedError> {
    spec.expect(&[ProblemKind::QofDelta], "solve_q_of_delta")?;
    solve_fixed_or_parameterized(spec, strategy)
}

fn solve_fixed_or_parameterized(spec: &ProblemSpec, strategy: &Strategy) -> Result<ProbabilityEstimate, MixedError> {
    match strategy {
        Strategy::Scenario(p) => scenario_estimate(spec, p),
        Strategy::TwoStep(p) => {
            let dist = spec.delta_dist.resolve(None)?;
            two_step(&spec.map, &spec.q_set, &dist, p)
        }
        Strategy::Auto => {
            if spec.map.m() <= 2 {
                solve_fixed_or_parameterized(spec, &Strategy::TwoStep(RegionParams::default()))
            } else {
                solve_fixed_or_parameterized(spec, &Strategy::Scenario(ScenarioParams::default()))
            }
        }
    }
}

/// Per-axis search interval: the support, or its central `truncation` part
/// for unbounded marginals. Returns the intervals and the mass left outside.
fn search_box(dist: &Distribution, truncation: f64) -> (Vec<(f64, f64)>, f64) {
    let mut inside = 1.0;
    let b = dist
        .marginals
        .iter()
        .map(|m| {
            if m.is_bounded() {
                m.support()
            } else {
                inside *= truncation;
                m.central_interval(truncation)
            }
        })
        .collect();
    (b, 1.0 - inside)
}

/// Stability region over the random parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Intervals(StabilityIntervals),
    Polygons(PolygonRegion),
}

impl Region {
    pub fn guarantee(&self) -> Guarantee {
        match self {
            Region::Intervals(iv) => iv.guarantee,
            Region::Polygons(p) => p.guarantee,
        }
    }
}

/// An extracted region with the probability mass its search box leaves out.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedRegion {
    pub region: Region,
    pub search: Vec<(f64, f64)>,
    pub outside_mass: f64,
}

/// Step one of the two-step pipeline: the set of deltas at which the family
/// is robustly stable, over the search box of `dist`.
pub fn extract_region(
    map: &CoefficientMap,
    set: &UncertaintySet,
    dist: &Distribution,
    p: &RegionParams,
) -> Result<ExtractedRegion, MixedError> {
    let m = map.m();
    if m == 0 {
        return Err(MixedError::InvalidSpec("no random parameters, so there is no region to extract".into()));
    }
    if m > 2 {
        return Err(MixedError::DimensionTooHigh { m, max: 2 });
    }
    if !(p.truncation > 0.0 && p.truncation < 1.0) {
        return Err(MixedError::Domain(format!("truncation must lie in (0, 1), got {}", p.truncation)));
    }
    let (search, outside_mass) = match &p.search {
        Some(s) => {
            if s.len() != m {
                return Err(MixedError::InvalidSpec(format!("search box has {} axes, expected {m}", s.len())));
            }
            let inside = dist.box_mass(
                &s.iter().map(|b| b.0).collect::<Vec<_>>(),
                &s.iter().map(|b| b.1).collect::<Vec<_>>(),
            );
            (s.clone(), (1.0 - inside).max(0.0))
        }
        None => search_box(dist, p.truncation),
    };
    let region = if m == 1 {
        let (lo, hi) = search[0];
        let h = (hi - lo) / p.scan_steps.max(1) as f64;
        Region::Intervals(stability_intervals_1d(map, set, (lo, hi), h, p.tol, p.method)?)
    } else {
        Region::Polygons(stability_region_2d(
            map,
            set,
            [search[0], search[1]],
            p.resolution,
            p.refine_depth,
            p.method,
        )?)
    };
    Ok(ExtractedRegion {
        region,
        search,
        outside_mass,
    })
}

/// Region extraction followed by its measure; all-discrete laws are summed
/// over their atoms instead.
fn two_step(
    map: &CoefficientMap,
    set: &UncertaintySet,
    dist: &Distribution,
    p: &RegionParams,
) -> Result<ProbabilityEstimate, MixedError> {
    let m = map.m();
    if m == 0 {
        let v = indicator_f(map, set, &[], p.method)?;
        return Ok(ProbabilityEstimate::exact(f64::from(u8::from(v.robust)), EstimateMethod::ExactCdf, v.guarantee));
    }
    if let Some(atoms) = dist.discrete_atoms() {
        return atom_sum(map, set, &atoms, p.method);
    }
    let any_discrete = dist
        .marginals
        .iter()
        .any(|mg| matches!(mg, Marginal::DiscretePmf { .. }));
    if any_discrete && m == 2 {
        return Err(MixedError::InvalidSpec(
            "mixing discrete and continuous marginals is only supported by the scenario strategy".into(),
        ));
    }
    let ex = extract_region(map, set, dist, p)?;
    let outside = ex.outside_mass;
    let mut est = match &ex.region {
        Region::Intervals(iv) => {
            let (lo, hi) = iv.search;
            let mut est = measure(iv, dist)?;
            est.notes.push(format!(
                "stability intervals from a scan with step {:e} on [{lo}, {hi}], endpoints bisected to {:e}",
                iv.step, iv.tol
            ));
            if outside > 0.0 {
                est.certificate = Certificate::Bracket {
                    lo: est.value,
                    hi: (est.value + outside).min(1.0),
                };
                est.notes.push(format!("search range excludes probability mass {outside:e}"));
            }
            est
        }
        Region::Polygons(region) => {
            let mut est = measure(region, dist)?;
            est.notes.push(format!(
                "region from a {r}x{r} grid with refinement depth {d}",
                r = p.resolution,
                d = p.refine_depth
            ));
            if outside > 0.0 {
                est.notes.push(format!("search box excludes probability mass {outside:e}, added to the bracket"));
            }
            est
        }
    };
    est.guarantee = ex.region.guarantee();
    Ok(est)
}

fn atom_sum(
    map: &CoefficientMap,
    set: &UncertaintySet,
    atoms: &[(Vec<f64>, f64)],
    method: RobustMethod,
) -> Result<ProbabilityEstimate, MixedError> {
    let mut p = 0.0;
    let mut g = Guarantee::Certified;
    for (delta, w) in atoms {
        if *w == 0.0 {
            continue;
        }
        let v = indicator_f(map, set, delta, method)?;
        g = g.and(v.guarantee);
        if v.robust {
            p += w;
        }
    }
    Ok(ProbabilityEstimate::exact(p, EstimateMethod::DiscreteSum, g))
}

/// Settings of the `DeltaOfQ` grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct QGridParams {
    /// Points per axis of the grid over `Q`, vertices included.
    pub resolution: usize,
    /// Rounds of local refinement around the incumbent minimum.
    pub refine: usize,
    pub region: RegionParams,
}

impl Default for QGridParams {
    fn default() -> Self {
        Self {
            resolution: 21,
            refine: 2,
            region: RegionParams::default(),
        }
    }
}

/// `P[delta : stable at (q, delta)]` for one fixed q, with the law of delta
/// resolved at q.
pub fn probability_at_q(spec: &ProblemSpec, q: &[f64], params: &RegionParams) -> Result<ProbabilityEstimate, MixedError> {
    if q.len() != spec.map.n() {
        return Err(MixedError::InvalidSpec(format!("q has length {}, expected {}", q.len(), spec.map.n())));
    }
    let dist = spec.delta_dist.resolve(Some(q))?;
    let point = UncertaintySet::Box {
        lo: q.to_vec(),
        hi: q.to_vec(),
    };
    two_step(&spec.map, &point, &dist, params)
}

/// `DeltaOfQ`: the guaranteed probability `min over q of p(q)`, minimized over a grid
/// with local refinement. The result is an upper bound on the infimum; ties
/// go to the lexicographically smallest q.
pub fn solve_delta_of_q(spec: &ProblemSpec, params: &QGridParams) -> Result<ProbabilityEstimate, MixedError> {
    spec.expect(&[ProblemKind::DeltaOfQ], "solve_delta_of_q")?;
    let m = spec.map.m();
    if m > 2 && !spec.delta_dist.is_discrete() {
        return Err(MixedError::DimensionTooHigh { m, max: 2 });
    }
    if params.resolution < 2 {
        return Err(MixedError::Domain(format!("q-grid resolution must be at least 2, got {}", params.resolution)));
    }
    let resolved = spec.q_set.resolve(None)?;
    let evaluate = |points: Vec<Vec<f64>>| -> Result<Vec<(Vec<f64>, ProbabilityEstimate)>, MixedError> {
        points
            .into_par_iter()
            .map(|q| {
                let e = probability_at_q(spec, &q, &params.region)?;
                Ok((q, e))
            })
            .collect()
    };
    let better = |a: &(Vec<f64>, ProbabilityEstimate), b: &(Vec<f64>, ProbabilityEstimate)| {
        a.1.value < b.1.value
            || (a.1.value == b.1.value && a.0.iter().zip(&b.0).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne())
                == Some(std::cmp::Ordering::Less))
    };

    let mut probed = evaluate(resolved.grid(params.resolution))?;
    let mut count = probed.len();
    let pick = |v: &[(Vec<f64>, ProbabilityEstimate)]| {
        v.iter().fold(None::<&(Vec<f64>, ProbabilityEstimate)>, |best, c| match best {
            Some(b) if !better(c, b) => Some(b),
            _ => Some(c),
        })
        .cloned()
        .expect("non-empty grid")
    };
    let mut best = pick(&probed);
    let mut guarantee = probed.iter().fold(Guarantee::Certified, |g, c| g.and(c.1.guarantee));

    // local refinement inside the bounding box of continuous sets
    let hull = match &resolved {
        ResolvedSet::Box { lo, hi } => Some((lo.clone(), hi.clone())),
        ResolvedSet::AxisEllipsoid { weights, center, bound } => Some((
            center.iter().zip(weights).map(|(c, w)| c - (bound / w).sqrt()).collect(),
            center.iter().zip(weights).map(|(c, w)| c + (bound / w).sqrt()).collect(),
        )),
        _ => None,
    };
    if let Some((lo, hi)) = hull {
        let mut spacing: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(a, b)| (b - a) / (params.resolution - 1) as f64)
            .collect();
        for _ in 0..params.refine {
            let axes: Vec<Vec<f64>> = (0..lo.len())
                .map(|i| {
                    let a = (best.0[i] - spacing[i]).max(lo[i]);
                    let b = (best.0[i] + spacing[i]).min(hi[i]);
                    if a < b {
                        linspace(a, b, params.resolution)
                    } else {
                        vec![best.0[i]]
                    }
                })
                .collect();
            let points: Vec<Vec<f64>> = tensor(&axes)
                .into_iter()
                .filter(|q| resolved.contains(q).unwrap_or(false))
                .collect();
            let round = evaluate(points)?;
            count += round.len();
            guarantee = round.iter().fold(guarantee, |g, c| g.and(c.1.guarantee));
            let cand = pick(&round);
            if better(&cand, &best) {
                best = cand;
            }
            probed.extend(round);
            for s in &mut spacing {
                *s *= 2.0 / (params.resolution - 1) as f64;
            }
        }
    }
    let (q, mut est) = best;
    est.worst_q = Some(q);
    est.guarantee = guarantee;
    est.notes.push(format!(
        "minimum over {count} probed q ({} per axis, {} refinement rounds); an upper bound on the infimum",
        params.resolution, params.refine
    ));
    Ok(est)
}

/// Finite forms of the three problems, summed exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscreteProblem {
    /// Finite Q shared by every atom of delta.
    QDelta {
        q_points: Vec<Vec<f64>>,
        atoms: Vec<(Vec<f64>, f64)>,
    },
    /// Each atom of delta carries its own finite Q.
    QofDelta { atoms: Vec<DiscreteAtom> },
    /// Each candidate q carries its own law of delta.
    DeltaOfQ { alternatives: Vec<(Vec<f64>, Vec<(Vec<f64>, f64)>)> },
    /// Atoms of delta against a general, possibly delta-dependent set.
    SetOfDelta {
        q_set: UncertaintySet,
        atoms: Vec<(Vec<f64>, f64)>,
        method: RobustMethod,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteAtom {
    pub delta: Vec<f64>,
    pub prob: f64,
    pub q_points: Vec<Vec<f64>>,
}

fn check_pmf<'a>(probs: impl Iterator<Item = &'a f64>) -> Result<(), MixedError> {
    let mut total = 0.0;
    let mut count = 0;
    for &p in probs {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(MixedError::NotDiscrete(format!("probability {p} is not a valid mass")));
        }
        total += p;
        count += 1;
    }
    if count == 0 {
        return Err(MixedError::NotDiscrete("no support points".into()));
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(MixedError::NotDiscrete(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Exact probability for a finite problem.
pub fn solve_discrete(map: &CoefficientMap, problem: &DiscreteProblem) -> Result<ProbabilityEstimate, MixedError> {
    let stable_all = |qs: &[Vec<f64>], delta: &[f64]| -> Result<bool, MixedError> {
        for q in qs {
            if !map.is_stable_at(q, delta)? {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let exact = |p: f64| ProbabilityEstimate::exact(p, EstimateMethod::DiscreteSum, Guarantee::Certified);
    match problem {
        DiscreteProblem::QDelta { q_points, atoms } => {
            check_pmf(atoms.iter().map(|a| &a.1))?;
            if q_points.is_empty() {
                return Err(MixedError::NotDiscrete("empty q-set".into()));
            }
            let mut p = 0.0;
            for (delta, w) in atoms {
                if stable_all(q_points, delta)? {
                    p += w;
                }
            }
            Ok(exact(p))
        }
        DiscreteProblem::QofDelta { atoms } => {
            check_pmf(atoms.iter().map(|a| &a.prob))?;
            let mut p = 0.0;
            for a in atoms {
                if stable_all(&a.q_points, &a.delta)? {
                    p += a.prob;
                }
            }
            Ok(exact(p))
        }
        DiscreteProblem::DeltaOfQ { alternatives } => {
            if alternatives.is_empty() {
                return Err(MixedError::NotDiscrete("no q alternatives".into()));
            }
            let mut best: Option<(f64, &Vec<f64>)> = None;
            for (q, atoms) in alternatives {
                check_pmf(atoms.iter().map(|a| &a.1))?;
                let mut p = 0.0;
                for (delta, w) in atoms {
                    if map.is_stable_at(q, delta)? {
                        p += w;
                    }
                }
                if best.is_none_or(|(b, _)| p < b) {
                    best = Some((p, q));
                }
            }
            let (p, q) = best.expect("non-empty");
            let mut est = exact(p);
            est.worst_q = Some(q.clone());
            Ok(est)
        }
        DiscreteProblem::SetOfDelta { q_set, atoms, method } => {
            check_pmf(atoms.iter().map(|a| &a.1))?;
            atom_sum(map, q_set, atoms, *method)
        }
    }
}

/// Probability bounds for `QofDelta` from two `QDelta` instances: the
/// family is robust over the hull of the union of all `Q(delta)` (lower bound)
/// and over their intersection (upper bound, vacuously 1 when empty).
///
/// Ranges of the set bounds are found on a grid over the delta support
/// (truncated to the central `truncation` mass for unbounded laws).
pub fn bounds_q_of_delta(
    spec: &ProblemSpec,
    truncation: Option<f64>,
    strategy: &Strategy,
) -> Result<(ProbabilityEstimate, ProbabilityEstimate), MixedError> {
    spec.expect(&[ProblemKind::QofDelta], "bounds_q_of_delta")?;
    let dist = spec.delta_dist.resolve(None)?;
    let UncertaintySet::ParamBox { lo, hi } = &spec.q_set else {
        let fixed = ProblemSpec {
            problem: ProblemKind::QDelta,
            ..spec.clone()
        };
        let e = solve_q_delta(&fixed, strategy)?;
        return Ok((e.clone(), e));
    };
    let mut notes = Vec::new();
    let support: Vec<(f64, f64)> = dist
        .marginals
        .iter()
        .map(|m| {
            if m.is_bounded() {
                Ok(m.support())
            } else {
                let t = truncation.ok_or_else(|| {
                    MixedError::UnboundedSupport("an unbounded marginal needs a truncation level".into())
                })?;
                if !(t > 0.0 && t < 1.0) {
                    return Err(MixedError::Domain(format!("truncation must lie in (0, 1), got {t}")));
                }
                notes.push(format!("unbounded marginal truncated to its central {t} mass"));
                Ok(m.central_interval(t))
            }
        })
        .collect::<Result<_, MixedError>>()?;

    let (union, inter) = set_hulls(lo, hi, &support)?;
    let problem_one = |set: UncertaintySet| -> Result<ProbabilityEstimate, MixedError> {
        let fixed = ProblemSpec {
            map: spec.map.clone(),
            q_set: set,
            delta_dist: spec.delta_dist.clone(),
            problem: ProblemKind::QDelta,
        };
        solve_q_delta(&fixed, strategy)
    };
    let vacuous = |what: &str| {
        ProbabilityEstimate::exact(1.0, EstimateMethod::ExactCdf, Guarantee::Certified)
            .with_note(format!("{what} is empty; robustness holds vacuously"))
    };
    let mut lower = match union {
        Some((l, h)) => problem_one(UncertaintySet::Box { lo: l, hi: h })?,
        None => vacuous("every Q(delta)"),
    };
    let mut upper = match inter {
        Some((l, h)) => problem_one(UncertaintySet::Box { lo: l, hi: h })?,
        None => vacuous("the intersection of all Q(delta)"),
    };
    lower.notes.extend(notes.iter().cloned());
    upper.notes.extend(notes);
    Ok((lower, upper))
}

/// Grid range analysis of `[lo(delta), hi(delta)]` over a delta box: the hull of the
/// union of the non-empty boxes and their intersection (`None` when empty).
#[allow(clippy::type_complexity)]
fn set_hulls(
    lo: &[Expression],
    hi: &[Expression],
    support: &[(f64, f64)],
) -> Result<(Option<(Vec<f64>, Vec<f64>)>, Option<(Vec<f64>, Vec<f64>)>), MixedError> {
    let per_axis = match support.len() {
        0 | 1 => 2001,
        2 => 201,
        _ => 21,
    };
    let axes: Vec<Vec<f64>> = support.iter().map(|&(a, b)| linspace(a, b, per_axis)).collect();
    let n = lo.len();
    let mut u_lo = vec![f64::INFINITY; n];
    let mut u_hi = vec![f64::NEG_INFINITY; n];
    let mut i_lo = vec![f64::NEG_INFINITY; n];
    let mut i_hi = vec![f64::INFINITY; n];
    let mut any = false;
    let mut all = true;
    for d in tensor(&axes) {
        let l = lo.iter().map(|e| e.evaluate(&[], &d)).collect::<Result<Vec<_>, _>>().map_err(ParamError::from)?;
        let h = hi.iter().map(|e| e.evaluate(&[], &d)).collect::<Result<Vec<_>, _>>().map_err(ParamError::from)?;
        if l.iter().zip(&h).any(|(a, b)| a > b) {
            all = false;
            continue;
        }
        any = true;
        for i in 0..n {
            u_lo[i] = u_lo[i].min(l[i]);
            u_hi[i] = u_hi[i].max(h[i]);
            i_lo[i] = i_lo[i].max(l[i]);
            i_hi[i] = i_hi[i].min(h[i]);
        }
    }
    let union = any.then_some((u_lo, u_hi));
    let inter = (all && i_lo.iter().zip(&i_hi).all(|(a, b)| a <= b)).then_some((i_lo, i_hi));
    Ok((union, inter))
}

/// Quantile-set certificate: true proves `p* >= p`.
///
/// Builds the box `Q_p` of per-axis central intervals at level `p^(1/m)` and
/// checks robust stability jointly over q and delta in `Q_p`, with delta
/// treated as extra deterministic parameters.
pub fn quantile_lower_bound(spec: &ProblemSpec, p: f64, method: RobustMethod) -> Result<Verdict, MixedError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(MixedError::Domain(format!("target level must lie in [0, 1], got {p}")));
    }
    let certified = |robust| Verdict {
        robust,
        guarantee: Guarantee::Certified,
    };
    if p == 0.0 {
        return Ok(certified(true));
    }
    let m = spec.map.m();
    if m == 0 {
        return Ok(indicator_f(&spec.map, &spec.q_set, &[], method)?);
    }
    let level = p.powf(1.0 / m as f64);
    let quantile_box = |dist: &Distribution| -> Vec<(f64, f64)> {
        dist.marginals.iter().map(|mg| mg.central_interval(level)).collect()
    };
    let joint = spec.map.with_delta_as_q();
    let joint_check = |q_lo: &[f64], q_hi: &[f64], d_box: &[(f64, f64)]| -> Result<Verdict, MixedError> {
        let mut lo = q_lo.to_vec();
        let mut hi = q_hi.to_vec();
        for &(a, b) in d_box {
            if !(a.is_finite() && b.is_finite()) {
                return Err(MixedError::UnboundedSupport("quantile interval is unbounded".into()));
            }
            lo.push(a);
            hi.push(b);
        }
        Ok(indicator_resolved(&joint, &ResolvedSet::Box { lo, hi }, &[], method)?)
    };
    // per-point checks over a non-box Q
    let over_points = |points: Vec<Vec<f64>>,
                       d_box: &dyn Fn(&[f64]) -> Result<Vec<(f64, f64)>, MixedError>,
                       exhaustive: bool|
     -> Result<Verdict, MixedError> {
        let mut g = if exhaustive { Guarantee::Certified } else { Guarantee::Sampled };
        for q in points {
            let v = joint_check(&q, &q, &d_box(&q)?)?;
            g = g.and(v.guarantee);
            if !v.robust {
                return Ok(Verdict { robust: false, guarantee: g });
            }
        }
        Ok(Verdict { robust: true, guarantee: g })
    };

    match spec.problem {
        ProblemKind::QDelta | ProblemKind::QofDelta => {
            let dist = spec.delta_dist.resolve(None)?;
            let qp = quantile_box(&dist);
            let resolved = match &spec.q_set {
                UncertaintySet::ParamBox { lo, hi } => match set_hulls(lo, hi, &qp)?.0 {
                    Some((l, h)) => ResolvedSet::Box { lo: l, hi: h },
                    None => ResolvedSet::Empty,
                },
                s => s.resolve(None)?,
            };
            match resolved {
                ResolvedSet::Empty => Ok(certified(true)),
                ResolvedSet::Box { lo, hi } => joint_check(&lo, &hi, &qp),
                ResolvedSet::Discrete { points } => over_points(points, &|_| Ok(qp.clone()), true),
                r @ ResolvedSet::AxisEllipsoid { .. } => {
                    over_points(r.grid(crate::robust::DEFAULT_GRID_RESOLUTION), &|_| Ok(qp.clone()), false)
                }
            }
        }
        ProblemKind::DeltaOfQ => {
            let resolved = spec.q_set.resolve(None)?;
            let exhaustive = matches!(resolved, ResolvedSet::Discrete { .. }) || resolved.is_single_point();
            let d_box = |q: &[f64]| -> Result<Vec<(f64, f64)>, MixedError> {
                Ok(quantile_box(&spec.delta_dist.resolve(Some(q))?))
            };
            over_points(resolved.grid(crate::robust::DEFAULT_GRID_RESOLUTION), &d_box, exhaustive)
        }
    }
}
