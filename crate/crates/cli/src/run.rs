//! Solver dispatch for a loaded config.

use std::io::Write;

use mixedrobust::estimate::ProbabilityEstimate;
use mixedrobust::mixed::{
    extract_region, scenario_estimate, solve_delta_of_q, solve_q_delta, solve_q_of_delta, ExtractedRegion,
    ProblemKind, Region, RegionParams, Strategy,
};
use mixedrobust::param::{ResolvedSet, UncertaintySet};
use mixedrobust::region::{write_intervals_csv, write_polygons_csv};

use crate::config::{Loaded, Plan};
use crate::CliError;

pub fn analyze(loaded: &Loaded) -> Result<ProbabilityEstimate, CliError> {
    let spec = &loaded.spec;
    let est = match (&loaded.plan, spec.problem()) {
        (Plan::QGrid(p), _) => solve_delta_of_q(spec, p)?,
        (Plan::Scenario(p), _) => scenario_estimate(spec, p)?,
        (Plan::TwoStep(p), ProblemKind::QDelta) => solve_q_delta(spec, &Strategy::TwoStep(p.clone()))?,
        (Plan::TwoStep(p), _) => solve_q_of_delta(spec, &Strategy::TwoStep(p.clone()))?,
    };
    Ok(est)
}

/// A region plus the optional nominal region drawn for comparison.
#[derive(Debug, Clone)]
pub struct RegionOutput {
    pub region: ExtractedRegion,
    pub nominal: Option<ExtractedRegion>,
    pub notes: Vec<String>,
}

fn point(q: Vec<f64>) -> UncertaintySet {
    UncertaintySet::Box { lo: q.clone(), hi: q }
}

fn center(set: &UncertaintySet) -> Result<Option<Vec<f64>>, CliError> {
    if set.is_parameterized() {
        return Ok(None);
    }
    match set.resolve(None).map_err(|e| CliError::Method(e.to_string()))? {
        ResolvedSet::Discrete { points } if !points.is_empty() => Ok(Some(points[0].clone())),
        r => Ok(r.center()),
    }
}

/// Extracts the stability region over delta. For `delta_of_q` the region and
/// the law are taken at the center of `Q`.
pub fn region(loaded: &Loaded, with_nominal: bool) -> Result<RegionOutput, CliError> {
    let spec = &loaded.spec;
    let mut notes = Vec::new();
    let params = match &loaded.plan {
        Plan::TwoStep(p) => p.clone(),
        Plan::QGrid(p) => p.region.clone(),
        Plan::Scenario(p) => {
            notes.push("scenario config: region extracted with default grid settings".into());
            RegionParams {
                method: p.method,
                ..RegionParams::default()
            }
        }
    };
    let q0 = center(spec.q_set())?;
    let (set, dist) = if spec.problem() == ProblemKind::DeltaOfQ {
        let q = q0.clone().ok_or_else(|| CliError::Method("q-set has no center".into()))?;
        notes.push(format!("region and law taken at q = {q:?}"));
        (point(q.clone()), spec.delta_dist().resolve(Some(&q)))
    } else {
        (spec.q_set().clone(), spec.delta_dist().resolve(None))
    };
    let dist = dist.map_err(|e| CliError::Config(e.to_string()))?;
    let region = extract_region(spec.map(), &set, &dist, &params)?;
    let nominal = match (with_nominal, q0) {
        (false, _) => None,
        (true, Some(q)) => {
            notes.push(format!("nominal region at q = {q:?}"));
            Some(extract_region(spec.map(), &point(q), &dist, &params)?)
        }
        (true, None) => {
            notes.push("no nominal region: the q-set depends on delta".into());
            None
        }
    };
    Ok(RegionOutput { region, nominal, notes })
}

pub fn write_csv<W: Write>(region: &Region, w: W) -> Result<(), CliError> {
    match region {
        Region::Intervals(iv) => write_intervals_csv(&iv.union, w)?,
        Region::Polygons(p) => write_polygons_csv(p, w)?,
    }
    Ok(())
}
