//! JSON problem configuration.

use mixedrobust::expr::Expression;
use mixedrobust::mixed::{ProblemKind, ProblemSpec, QGridParams, RegionParams, ScenarioParams};
use mixedrobust::param::{DistributionSpec, MarginalSpec, Param, UncertaintySet};
use mixedrobust::poly::StabilityKind;
use mixedrobust::robust::{CoefficientMap, RobustMethod, DEFAULT_GRID_RESOLUTION, DEFAULT_OMEGA_POINTS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub stability: StabilityKind,
    pub dims: Dims,
    /// Coefficient expressions, highest power first.
    pub polynomial: Vec<String>,
    pub q_set: SetConfig,
    pub delta_dist: Vec<MarginalConfig>,
    pub problem: ProblemKind,
    #[serde(default)]
    pub method: MethodConfig,
    /// Copied verbatim into every report.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetConfig {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    AxisEllipsoid { weights: Vec<f64>, center: Vec<f64>, bound: f64 },
    Discrete { points: Vec<Vec<f64>> },
    /// Bounds are expressions over d1..dm.
    ParamBox { lo: Vec<String>, hi: Vec<String> },
}

/// A distribution parameter: a number, or an expression over q1..qn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamConfig {
    Number(f64),
    Expr(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalConfig {
    Uniform { lo: ParamConfig, hi: ParamConfig },
    Normal { mean: ParamConfig, std: ParamConfig },
    Laplace { location: ParamConfig, scale: ParamConfig },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    #[default]
    Auto,
    TwoStep,
    Scenario,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    #[serde(default)]
    pub strategy: StrategyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robust: Option<RobustConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_refine: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RobustConfig {
    Auto,
    Kharitonov,
    ZeroExclusion {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega_max: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega_points: Option<usize>,
    },
    Grid {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
    },
}

impl From<RobustConfig> for RobustMethod {
    fn from(c: RobustConfig) -> Self {
        match c {
            RobustConfig::Auto => RobustMethod::Auto,
            RobustConfig::Kharitonov => RobustMethod::Kharitonov,
            RobustConfig::ZeroExclusion { omega_max, omega_points } => RobustMethod::ZeroExclusion {
                omega_max,
                omega_points: omega_points.unwrap_or(DEFAULT_OMEGA_POINTS),
            },
            RobustConfig::Grid { resolution } => RobustMethod::GridFallback {
                resolution: resolution.unwrap_or(DEFAULT_GRID_RESOLUTION),
            },
        }
    }
}

/// What to run once a config is validated.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    TwoStep(RegionParams),
    Scenario(ScenarioParams),
    QGrid(QGridParams),
}

/// A validated config, ready to run.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ProblemConfig,
    pub spec: ProblemSpec,
    pub plan: Plan,
    /// `sha256:` followed by the hex digest of the config text.
    pub digest: String,
}

impl Loaded {
    pub fn seed(&self) -> Option<u64> {
        match &self.plan {
            Plan::Scenario(p) => Some(p.seed),
            _ => None,
        }
    }
}

pub fn digest(text: &str) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(text.as_bytes())))
}

/// Parses and validates a config. `seed` overrides the config's seed.
pub fn load(text: &str, seed: Option<u64>) -> Result<Loaded, CliError> {
    let config: ProblemConfig =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config does not match the schema: {e}")))?;
    let (spec, plan) = config.build(seed)?;
    Ok(Loaded {
        config,
        spec,
        plan,
        digest: digest(text),
    })
}

fn expr(text: &str, n: usize, m: usize, what: &str) -> Result<Expression, CliError> {
    Expression::parse(text, n, m).map_err(|e| CliError::Config(format!("{what} `{text}`: {e}")))
}

fn param(p: &ParamConfig, n: usize, what: &str) -> Result<Param, CliError> {
    match p {
        ParamConfig::Number(v) => Ok(Param::Const(*v)),
        ParamConfig::Expr(s) => Ok(Param::Expr(expr(s, n, 0, what)?)),
    }
}

impl ProblemConfig {
    pub fn build(&self, seed: Option<u64>) -> Result<(ProblemSpec, Plan), CliError> {
        let Dims { n, m } = self.dims;
        let cfg = |s: String| CliError::Config(s);
        if self.polynomial.len() < 2 {
            return Err(cfg("polynomial needs at least two coefficients".into()));
        }
        let coeffs = self
            .polynomial
            .iter()
            .enumerate()
            .rev()
            .map(|(i, s)| expr(s, n, m, &format!("polynomial[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let map = CoefficientMap::new(self.stability, n, m, coeffs).map_err(|e| cfg(e.to_string()))?;

        let q_set = match &self.q_set {
            SetConfig::Box { lo, hi } => UncertaintySet::Box {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            SetConfig::AxisEllipsoid { weights, center, bound } => UncertaintySet::AxisEllipsoid {
                weights: weights.clone(),
                center: center.clone(),
                bound: *bound,
            },
            SetConfig::Discrete { points } => UncertaintySet::Discrete { points: points.clone() },
            SetConfig::ParamBox { lo, hi } => UncertaintySet::ParamBox {
                lo: lo
                    .iter()
                    .enumerate()
                    .map(|(i, s)| expr(s, 0, m, &format!("q_set.lo[{i}]")))
                    .collect::<Result<_, _>>()?,
                hi: hi
                    .iter()
                    .enumerate()
                    .map(|(i, s)| expr(s, 0, m, &format!("q_set.hi[{i}]")))
                    .collect::<Result<_, _>>()?,
            },
        };

        let marginals = self
            .delta_dist
            .iter()
            .enumerate()
            .map(|(i, mc)| {
                let w = |f: &str| format!("delta_dist[{i}].{f}");
                Ok(match mc {
                    MarginalConfig::Uniform { lo, hi } => MarginalSpec::Uniform {
                        lo: param(lo, n, &w("lo"))?,
                        hi: param(hi, n, &w("hi"))?,
                    },
                    MarginalConfig::Normal { mean, std } => MarginalSpec::Normal {
                        mean: param(mean, n, &w("mean"))?,
                        std: param(std, n, &w("std"))?,
                    },
                    MarginalConfig::Laplace { location, scale } => MarginalSpec::Laplace {
                        location: param(location, n, &w("location"))?,
                        scale: param(scale, n, &w("scale"))?,
                    },
                    MarginalConfig::Discrete { values, probs } => MarginalSpec::DiscretePmf {
                        values: values.clone(),
                        probs: probs.clone(),
                    },
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;

        let spec = ProblemSpec::new(map, q_set, DistributionSpec::new(marginals), self.problem)
            .map_err(|e| cfg(e.to_string()))?;
        let plan = self.method.plan(self.problem, m, seed)?;
        Ok((spec, plan))
    }
}

impl MethodConfig {
    fn region_fields(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let mut f = |set: bool, name| {
            if set {
                v.push(name)
            }
        };
        f(self.resolution.is_some(), "resolution");
        f(self.refine_depth.is_some(), "refine_depth");
        f(self.scan_steps.is_some(), "scan_steps");
        f(self.tol.is_some(), "tol");
        f(self.search.is_some(), "search");
        f(self.truncation.is_some(), "truncation");
        v
    }

    fn scenario_fields(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let mut f = |set: bool, name| {
            if set {
                v.push(name)
            }
        };
        f(self.epsilon.is_some(), "epsilon");
        f(self.theta.is_some(), "theta");
        f(self.seed.is_some(), "seed");
        f(self.samples.is_some(), "samples");
        v
    }

    fn region_params(&self, robust: RobustMethod) -> RegionParams {
        let d = RegionParams::default();
        RegionParams {
            resolution: self.resolution.unwrap_or(d.resolution),
            refine_depth: self.refine_depth.unwrap_or(d.refine_depth),
            scan_steps: self.scan_steps.unwrap_or(d.scan_steps),
            tol: self.tol.unwrap_or(d.tol),
            search: self.search.as_ref().map(|s| s.iter().map(|b| (b[0], b[1])).collect()),
            truncation: self.truncation.unwrap_or(d.truncation),
            method: robust,
        }
    }

    fn plan(&self, problem: ProblemKind, m: usize, seed: Option<u64>) -> Result<Plan, CliError> {
        let reject = |fields: Vec<&str>, why: &str| {
            if fields.is_empty() {
                Ok(())
            } else {
                Err(CliError::Config(format!("method field(s) {} not allowed {why}", fields.join(", "))))
            }
        };
        let robust = self.robust.map(RobustMethod::from).unwrap_or_default();
        robust.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(s) = &self.search {
            if let Some(b) = s.iter().find(|b| !(b[0] < b[1])) {
                return Err(CliError::Config(format!("search interval [{}, {}] is empty", b[0], b[1])));
            }
        }
        if problem == ProblemKind::DeltaOfQ {
            if self.strategy == StrategyKind::Scenario {
                return Err(CliError::Config("delta_of_q is solved on a q-grid; scenario is not available".into()));
            }
            reject(self.scenario_fields(), "for delta_of_q")?;
            let d = QGridParams::default();
            return Ok(Plan::QGrid(QGridParams {
                resolution: self.q_resolution.unwrap_or(d.resolution),
                refine: self.q_refine.unwrap_or(d.refine),
                region: self.region_params(robust),
            }));
        }
        let mut q_fields = Vec::new();
        if self.q_resolution.is_some() {
            q_fields.push("q_resolution");
        }
        if self.q_refine.is_some() {
            q_fields.push("q_refine");
        }
        reject(q_fields, "outside delta_of_q")?;
        let strategy = match self.strategy {
            StrategyKind::Auto if m <= 2 => StrategyKind::TwoStep,
            StrategyKind::Auto => StrategyKind::Scenario,
            s => s,
        };
        match strategy {
            StrategyKind::Scenario => {
                if self.strategy == StrategyKind::Scenario {
                    reject(self.region_fields(), "with the scenario strategy")?;
                }
                let d = ScenarioParams::default();
                Ok(Plan::Scenario(ScenarioParams {
                    epsilon: self.epsilon.unwrap_or(d.epsilon),
                    theta: self.theta.unwrap_or(d.theta),
                    seed: seed.or(self.seed).unwrap_or(d.seed),
                    samples: self.samples,
                    method: robust,
                }))
            }
            _ => {
                if self.strategy == StrategyKind::TwoStep {
                    reject(self.scenario_fields(), "with the two_step strategy")?;
                }
                Ok(Plan::TwoStep(self.region_params(robust)))
            }
        }
    }
}
