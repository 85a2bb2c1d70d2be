//! Built-in examples checked against reference values.

use std::fmt;
use std::time::{Duration, Instant};

use mixedrobust::mixed::{probability_at_q, Region};
use mixedrobust::poly::StabilityKind;

use crate::builtin::{find, Example};
use crate::config::{self, Loaded, Plan};
use crate::run::{analyze, region};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub target: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    /// `|value - target| <= tol`.
    pub fn near(label: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self {
            label: label.into(),
            value: value + 0.0,
            target,
            tol,
            pass: (value - target).abs() <= tol,
        }
    }

    /// `value < bound`.
    pub fn below(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            value,
            target: bound,
            tol: 0.0,
            pass: value < bound,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.pass { "ok" } else { "off" };
        if self.tol > 0.0 {
            write!(
                f,
                "{} = {:.10} (target {} +/- {:e}) {mark}",
                self.label, self.value, self.target, self.tol
            )
        } else {
            write!(f, "{} = {:.4} (must be < {}) {mark}", self.label, self.value, self.target)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: &'static str,
    pub name: &'static str,
    pub checks: Vec<Check>,
    /// Informational lines that do not affect the verdict.
    pub diagnostics: Vec<String>,
    pub elapsed: Duration,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    /// One `PASS`/`FAIL` line followed by indented check and diagnostic lines.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{} {} {} ({:.2} s)\n",
            if self.pass() { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64()
        );
        for c in &self.checks {
            s.push_str(&format!("    {c}\n"));
        }
        for d in &self.diagnostics {
            s.push_str(&format!("    note: {d}\n"));
        }
        s
    }
}

fn intervals(loaded: &Loaded) -> Result<Vec<(f64, f64)>, CliError> {
    match region(loaded, false)?.region.region {
        Region::Intervals(iv) => Ok(iv.union.intervals().to_vec()),
        Region::Polygons(_) => Err(CliError::Internal("expected a one-dimensional region".into())),
    }
}

/// Checks that the region is exactly one interval near `[a, b]`.
fn interval_checks(found: &[(f64, f64)], (a, b): (f64, f64), tol: f64, checks: &mut Vec<Check>) {
    checks.push(Check::near("interval count", found.len() as f64, 1.0, 0.5));
    let (lo, hi) = found.first().copied().unwrap_or((f64::NAN, f64::NAN));
    checks.push(Check::near("left endpoint", lo, a, tol));
    checks.push(Check::near("right endpoint", hi, b, tol));
}

fn timed<T>(f: impl FnOnce() -> Result<T, CliError>) -> Result<(T, f64), CliError> {
    let t = Instant::now();
    let v = f()?;
    Ok((v, t.elapsed().as_secs_f64()))
}

fn fmt_intervals(iv: &[(f64, f64)]) -> String {
    let parts: Vec<String> = iv.iter().map(|(a, b)| format!("[{a:.6}, {b:.6}]")).collect();
    if parts.is_empty() {
        "empty".into()
    } else {
        parts.join(" u ")
    }
}

pub fn run_example(ex: &'static Example) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let loaded = config::load(ex.config, None)?;
    let mut checks = Vec::new();
    let mut diagnostics = Vec::new();
    match ex.id {
        "5.1" => {
            let (est, secs) = timed(|| analyze(&loaded))?;
            let (found, rsecs) = timed(|| intervals(&loaded))?;
            interval_checks(&found, (-0.11, 2.21), 1e-3, &mut checks);
            checks.push(Check::near("p", est.value, 0.982, 2e-3));
            checks.push(Check::below("runtime [s]", secs + rsecs, 10.0));
            diagnostics.push(format!("Schur region: {}", fmt_intervals(&found)));
            let mut hurwitz = loaded.config.clone();
            hurwitz.stability = StabilityKind::Hurwitz;
            let (spec, plan) = hurwitz.build(None)?;
            let alt = Loaded {
                config: hurwitz,
                spec,
                plan,
                digest: loaded.digest.clone(),
            };
            diagnostics.push(format!(
                "the same coefficients read as a Hurwitz polynomial give {}",
                fmt_intervals(&intervals(&alt)?)
            ));
        }
        "5.2" => {
            let (est, secs) = timed(|| analyze(&loaded))?;
            checks.push(Check::near("p", est.value, 0.68901, 5e-3));
            let (lo, hi) = est.bracket().unwrap_or((0.0, 1.0));
            checks.push(Check::below("bracket width", hi - lo, 1e-2));
            checks.push(Check::below("runtime [s]", secs, 60.0));
            diagnostics.push(format!("bracket [{lo:.6}, {hi:.6}]"));
        }
        "5.3.1" => {
            let est = analyze(&loaded)?;
            checks.push(Check::near("p", est.value, 1.0 / 3.0, 1e-9));
            interval_checks(&intervals(&loaded)?, (1.0, 1.5), 1e-6, &mut checks);
        }
        "5.3.2" => {
            let est = analyze(&loaded)?;
            checks.push(Check::near("p", est.value, 0.3, 1e-6));
            interval_checks(&intervals(&loaded)?, (0.75, 1.125), 1e-6, &mut checks);
        }
        "5.3.3" => {
            let est = analyze(&loaded)?;
            checks.push(Check::near("p", est.value, 0.8157, 5e-4));
            diagnostics.push(format!("stability intervals {}", fmt_intervals(&intervals(&loaded)?)));
        }
        "5.3.4" => {
            let est = analyze(&loaded)?;
            checks.push(Check::near("min p", est.value, 0.9568, 1e-3));
            let q = est.worst_q.as_ref().map_or(f64::NAN, |q| q[0]);
            checks.push(Check::near("argmin q", q, 0.7, 5e-3));
            let Plan::QGrid(grid) = &loaded.plan else {
                return Err(CliError::Internal("expected a q-grid plan".into()));
            };
            let probe = probability_at_q(&loaded.spec, &[1.1], &grid.region)?;
            checks.push(Check::near("p(1.1)", probe.value, 0.9655, 1e-3));
        }
        other => return Err(CliError::Internal(format!("no checks for example {other}"))),
    }
    Ok(Outcome {
        id: ex.id,
        name: ex.name,
        checks,
        diagnostics,
        elapsed: start.elapsed(),
    })
}

pub fn run(id: &str) -> Result<Outcome, CliError> {
    let ex = find(id).ok_or_else(|| CliError::Config(format!("unknown example `{id}`")))?;
    run_example(ex)
}
