use serde::{Deserialize, Serialize};

use crate::robust::Guarantee;

/// How a probability was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    /// Sum of CDF differences over stability intervals.
    ExactCdf,
    /// Area ratio under a uniform law.
    Geometric,
    /// Per-cell product-marginal mass under a non-uniform law.
    Quadrature,
    /// Monte Carlo with a Chernoff sample size.
    Scenario,
    /// Finite sum over discrete support points.
    DiscreteSum,
}

/// Error certificate attached to an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// `|p - value| < epsilon` with probability at least `1 - theta`.
    Scenario {
        epsilon: f64,
        theta: f64,
        samples: u64,
        successes: u64,
    },
    /// The true value lies in `[lo, hi]`.
    Bracket { lo: f64, hi: f64 },
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub value: f64,
    pub method: EstimateMethod,
    pub certificate: Certificate,
    /// Minimizing q for guaranteed-probability problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_q: Option<Vec<f64>>,
    pub guarantee: Guarantee,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ProbabilityEstimate {
    pub fn exact(value: f64, method: EstimateMethod, guarantee: Guarantee) -> Self {
        Self {
            value: value.clamp(0.0, 1.0),
            method,
            certificate: Certificate::Exact,
            worst_q: None,
            guarantee,
            notes: Vec::new(),
        }
    }

    /// Midpoint of `[lo, hi]`, clamped into `[0, 1]`.
    pub fn bracketed(lo: f64, hi: f64, method: EstimateMethod, guarantee: Guarantee) -> Self {
        let lo = lo.clamp(0.0, 1.0);
        let hi = hi.clamp(lo, 1.0);
        Self {
            value: 0.5 * (lo + hi),
            method,
            certificate: Certificate::Bracket { lo, hi },
            worst_q: None,
            guarantee,
            notes: Vec::new(),
        }
    }

    pub fn bracket(&self) -> Option<(f64, f64)> {
        match self.certificate {
            Certificate::Bracket { lo, hi } => Some((lo, hi)),
            _ => None,
        }
    }

    /// Half the bracket width, `epsilon` for scenario estimates, zero when exact.
    pub fn half_width(&self) -> f64 {
        match self.certificate {
            Certificate::Bracket { lo, hi } => 0.5 * (hi - lo),
            Certificate::Scenario { epsilon, .. } => epsilon,
            Certificate::Exact => 0.0,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}
