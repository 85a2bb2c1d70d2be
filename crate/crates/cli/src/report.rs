//! JSON analysis report.

use mixedrobust::estimate::{Certificate, EstimateMethod, ProbabilityEstimate};
use mixedrobust::mixed::ProblemKind;
use mixedrobust::robust::Guarantee;
use serde::{Deserialize, Serialize};

use crate::config::Loaded;
use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const CHERNOFF_NOTE: &str =
    "sample size N = ceil(ln(2/theta) / (2 epsilon^2)), the additive Hoeffding bound; a 1/(2 epsilon) form would be far too small";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub problem: ProblemKind,
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub successes: Option<u64>,
    pub method: EstimateMethod,
    pub guarantee: Guarantee,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_file: Option<String>,
    pub config_digest: String,
    pub seed: Option<u64>,
    pub notes: Vec<String>,
    /// Fields that vary between builds and are excluded from reproducibility checks.
    pub meta: Meta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub tool_version: String,
}

impl Report {
    pub fn new(est: &ProbabilityEstimate, loaded: &Loaded, region_file: Option<String>) -> Self {
        let mut notes = loaded.config.notes.clone();
        notes.extend(est.notes.iter().cloned());
        let (mut bracket, mut epsilon, mut theta, mut samples, mut successes) = (None, None, None, None, None);
        match est.certificate {
            Certificate::Bracket { lo, hi } => bracket = Some([lo, hi]),
            Certificate::Scenario {
                epsilon: e,
                theta: t,
                samples: n,
                successes: k,
            } => {
                epsilon = Some(e);
                theta = Some(t);
                samples = Some(n);
                successes = Some(k);
                notes.push(CHERNOFF_NOTE.into());
            }
            Certificate::Exact => {}
        }
        if est.guarantee == Guarantee::Sampled {
            notes.push("robustness over q was checked on a finite sample of q, not certified".into());
        }
        Self {
            problem: loaded.spec.problem(),
            probability: est.value,
            bracket,
            epsilon,
            theta,
            samples,
            successes,
            method: est.method,
            guarantee: est.guarantee,
            worst_q: est.worst_q.clone(),
            region_file,
            config_digest: loaded.digest.clone(),
            seed: loaded.seed(),
            notes,
            meta: Meta {
                tool_version: TOOL_VERSION.into(),
            },
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Internal(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}
