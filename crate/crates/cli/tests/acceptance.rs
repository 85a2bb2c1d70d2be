//! Acceptance criteria, one verdict line each.
//!
//! Runs without the libtest harness so the lines are always printed and the
//! criteria run one at a time. The process fails when a criterion outside
//! `KNOWN_UNATTAINABLE` fails.

use std::process::ExitCode;
use std::time::Instant;

use mixedrobust::expr::Expression;
use mixedrobust::mixed::{
    bounds_q_of_delta, chernoff_sample_size, scenario_estimate, solve_discrete, solve_q_of_delta, DiscreteAtom,
    DiscreteProblem, ProblemKind, ProblemSpec, ScenarioParams, Strategy,
};
use mixedrobust::param::{DistributionSpec, MarginalSpec, UncertaintySet};
use mixedrobust::poly::{Polynomial, StabilityKind};
use mixedrobust::robust::{kharitonov_hurwitz, CoefficientMap};
use mixedrobust_cli::builtin::ELLIPSE_PLANE_SCENARIO;
use mixedrobust_cli::config::{self, Plan};
use mixedrobust_cli::repro;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// The first example's reference interval cannot be reproduced.
const KNOWN_UNATTAINABLE: &[u32] = &[1];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn example(id: &str) -> Verdict {
    match repro::run(id) {
        Ok(o) => {
            let detail = o
                .checks
                .iter()
                .map(|c| c.to_string())
                .chain(o.diagnostics.iter().map(|d| format!("note: {d}")))
                .collect::<Vec<_>>()
                .join("; ");
            verdict(o.pass(), detail)
        }
        Err(e) => verdict(false, format!("error: {e}")),
    }
}

fn scenario_seeds() -> Verdict {
    let loaded = config::load(ELLIPSE_PLANE_SCENARIO, None).unwrap();
    let Plan::Scenario(base) = loaded.plan.clone() else {
        return verdict(false, "expected a scenario plan");
    };
    let mut parts = Vec::new();
    let mut pass = true;
    for seed in 0..5u64 {
        let p = ScenarioParams { seed, ..base.clone() };
        let e = scenario_estimate(&loaded.spec, &p).unwrap();
        let n = match e.certificate {
            mixedrobust::estimate::Certificate::Scenario { samples, .. } => samples,
            _ => 0,
        };
        pass &= n == 84057 && (e.value - 0.68901).abs() <= 0.01;
        parts.push(format!("seed {seed}: {:.5}", e.value));
    }
    verdict(pass, format!("N = 84057; {}", parts.join(", ")))
}

fn chernoff() -> Verdict {
    let n = chernoff_sample_size(0.01, 1e-7).unwrap();
    verdict(n == 84057, format!("N = {n}"))
}

fn expand(lead: f64, real: &[f64], pairs: &[Complex64]) -> Vec<f64> {
    // ascending coefficients of lead * prod (x - r) * prod (x^2 - 2 Re(z) x + |z|^2)
    let mut c = vec![lead];
    let mul = |c: &[f64], f: &[f64]| {
        let mut out = vec![0.0; c.len() + f.len() - 1];
        for (i, a) in c.iter().enumerate() {
            for (j, b) in f.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    };
    for r in real {
        c = mul(&c, &[-r, 1.0]);
    }
    for z in pairs {
        c = mul(&c, &[z.norm_sqr(), -2.0 * z.re, 1.0]);
    }
    c
}

fn stability_oracle() -> Verdict {
    let mut rng = StdRng::seed_from_u64(9);
    let (mut checked, mut excluded, mut wrong, mut stable) = (0, 0, 0, 0);
    for i in 0..10_000 {
        let kind = if i % 2 == 0 { StabilityKind::Hurwitz } else { StabilityKind::Schur };
        let degree = rng.random_range(1..=8usize);
        let (poly, margin) = if i % 4 < 2 {
            // known roots
            let pairs_n = rng.random_range(0..=degree / 2);
            let real_n = degree - 2 * pairs_n;
            let root = |rng: &mut StdRng| match kind {
                StabilityKind::Hurwitz => Complex64::new(rng.random_range(-3.0..0.3), rng.random_range(0.05..3.0)),
                StabilityKind::Schur => Complex64::from_polar(
                    rng.random_range(0.0..1.08),
                    rng.random_range(0.05..std::f64::consts::PI - 0.05),
                ),
            };
            let real: Vec<f64> = (0..real_n)
                .map(|_| match kind {
                    StabilityKind::Hurwitz => rng.random_range(-3.0..0.3),
                    StabilityKind::Schur => rng.random_range(-1.08..1.08),
                })
                .collect();
            let pairs: Vec<Complex64> = (0..pairs_n).map(|_| root(&mut rng)).collect();
            let mut lead = rng.random_range(0.5..2.0);
            if rng.random_bool(0.5) {
                lead = -lead;
            }
            let margin = real
                .iter()
                .map(|r| Complex64::new(*r, 0.0))
                .chain(pairs.iter().copied())
                .map(|z| match kind {
                    StabilityKind::Hurwitz => -z.re,
                    StabilityKind::Schur => 1.0 - z.norm(),
                })
                .fold(f64::INFINITY, f64::min);
            (Polynomial::new(expand(lead, &real, &pairs)), margin)
        } else {
            // random coefficients, roots from the companion matrix
            let coeffs: Vec<f64> = (0..=degree)
                .map(|_| match kind {
                    StabilityKind::Hurwitz => rng.random_range(0.1..2.0),
                    StabilityKind::Schur => rng.random_range(-1.0..1.0),
                })
                .collect();
            let p = Polynomial::new(coeffs);
            let m = p.stability_margin(kind).unwrap();
            (p, m)
        };
        if margin.abs() < 1e-6 {
            excluded += 1;
            continue;
        }
        checked += 1;
        let got = poly.is_stable(kind).unwrap();
        stable += usize::from(got);
        if got != (margin > 0.0) {
            wrong += 1;
        }
    }
    verdict(
        wrong == 0 && excluded <= 100,
        format!("{checked} checked ({stable} stable), {wrong} disagreements, {excluded} excluded"),
    )
}

fn grid_points(intervals: &[(f64, f64)], per_axis: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
    let total = per_axis.pow(intervals.len() as u32);
    (0..total).map(move |mut k| {
        intervals
            .iter()
            .map(|(lo, hi)| {
                let i = k % per_axis;
                k /= per_axis;
                lo + (hi - lo) * i as f64 / (per_axis - 1) as f64
            })
            .collect()
    })
}

fn kharitonov_grid() -> Verdict {
    let mut rng = StdRng::seed_from_u64(10);
    let (mut robust, mut mismatches) = (0, 0);
    for _ in 0..200 {
        let degree = rng.random_range(1..=6usize);
        let real: Vec<f64> = (0..degree).map(|_| rng.random_range(-2.0..0.1)).collect();
        let center = expand(1.0, &real, &[]);
        let spread = rng.random_range(0.0..1.5);
        let intervals: Vec<(f64, f64)> = center
            .iter()
            .map(|c| {
                let w = spread * c.abs() * rng.random_range(0.0..1.0);
                let lo = c - w * rng.random_range(0.0..1.0);
                let hi = c + w * rng.random_range(0.0..1.0);
                (lo, hi)
            })
            .collect();
        let k = kharitonov_hurwitz(&intervals).unwrap();
        let grid = grid_points(&intervals, 5).all(|c| Polynomial::new(c).is_hurwitz().unwrap());
        robust += usize::from(k);
        if k != grid {
            mismatches += 1;
        }
    }
    verdict(mismatches == 0, format!("200 families, {robust} robust, {mismatches} mismatches"))
}

fn affine_cubic(rng: &mut StdRng) -> (CoefficientMap, Vec<[f64; 3]>) {
    // s^3 + c2 s^2 + c1 s + c0 with c_j = a + b*q1 + c*d1
    let rows: Vec<[f64; 3]> = (0..3)
        .map(|_| [rng.random_range(0.5..3.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let mut text = vec!["1".to_string()];
    text.extend(rows.iter().map(|[a, b, c]| format!("({a}) + ({b})*q1 + ({c})*d1")));
    let map = CoefficientMap::parse_descending(StabilityKind::Hurwitz, 1, 1, &text).unwrap();
    (map, rows)
}

/// Stability by roots of the coefficients computed directly from the rows.
fn brute_stable(rows: &[[f64; 3]], q: f64, d: f64) -> bool {
    let mut desc = vec![1.0];
    desc.extend(rows.iter().map(|[a, b, c]| a + b * q + c * d));
    Polynomial::from_descending(&desc).stability_margin(StabilityKind::Hurwitz).unwrap() > 0.0
}

fn pmf(rng: &mut StdRng, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn discrete_instances() -> Verdict {
    let mut rng = StdRng::seed_from_u64(11);
    let mut mismatches = 0;
    let mut values = Vec::new();
    for i in 0..200 {
        let (map, rows) = affine_cubic(&mut rng);
        let point = |rng: &mut StdRng| vec![rng.random_range(-2.0..2.0)];
        let (problem, expected) = match i % 3 {
            0 => {
                let q_points: Vec<Vec<f64>> = (0..rng.random_range(1..=6)).map(|_| point(&mut rng)).collect();
                let k = rng.random_range(1..=6);
                let atoms: Vec<(Vec<f64>, f64)> = pmf(&mut rng, k).into_iter().map(|w| (point(&mut rng), w)).collect();
                let mut p = 0.0;
                for (d, w) in &atoms {
                    if q_points.iter().all(|q| brute_stable(&rows, q[0], d[0])) {
                        p += w;
                    }
                }
                (DiscreteProblem::QDelta { q_points, atoms }, p)
            }
            1 => {
                let k = rng.random_range(1..=6);
                let atoms: Vec<DiscreteAtom> = pmf(&mut rng, k)
                    .into_iter()
                    .map(|prob| DiscreteAtom {
                        delta: point(&mut rng),
                        prob,
                        q_points: (0..rng.random_range(1..=6)).map(|_| point(&mut rng)).collect(),
                    })
                    .collect();
                let mut p = 0.0;
                for a in &atoms {
                    if a.q_points.iter().all(|q| brute_stable(&rows, q[0], a.delta[0])) {
                        p += a.prob;
                    }
                }
                (DiscreteProblem::QofDelta { atoms }, p)
            }
            _ => {
                let alternatives: Vec<(Vec<f64>, Vec<(Vec<f64>, f64)>)> = (0..rng.random_range(1..=6))
                    .map(|_| {
                        let k = rng.random_range(1..=6);
                        let q = point(&mut rng);
                        let atoms = pmf(&mut rng, k).into_iter().map(|w| (point(&mut rng), w)).collect();
                        (q, atoms)
                    })
                    .collect();
                let p = alternatives
                    .iter()
                    .map(|(q, atoms)| {
                        let mut p = 0.0;
                        for (d, w) in atoms {
                            if brute_stable(&rows, q[0], d[0]) {
                                p += w;
                            }
                        }
                        p
                    })
                    .fold(f64::INFINITY, f64::min);
                (DiscreteProblem::DeltaOfQ { alternatives }, p)
            }
        };
        let got = solve_discrete(&map, &problem).unwrap().value;
        values.push(got);
        if got != expected {
            mismatches += 1;
        }
    }
    let nontrivial = values.iter().filter(|v| **v > 0.0 && **v < 1.0).count();
    verdict(mismatches == 0, format!("200 instances, {nontrivial} strictly between 0 and 1, {mismatches} mismatches"))
}

/// Closed form for Q(d) = [alpha - d/beta, gamma - d] under U(u0, u1) with
/// stability iff |q - d| < 0.5: robust where Q(d) is empty or inside (d - 0.5, d + 0.5).
fn shrinking_box_exact(alpha: f64, beta: f64, gamma: f64, u0: f64, u1: f64) -> f64 {
    let clip = |a: f64, b: f64| (a.max(u0), b.min(u1));
    let inside = clip((gamma - 0.5) / 2.0, (alpha + 0.5) / (1.0 + 1.0 / beta));
    let empty = clip((gamma - alpha) / (1.0 - 1.0 / beta), u1);
    let len = |(a, b): (f64, f64)| (b - a).max(0.0);
    let overlap = len((inside.0.max(empty.0), inside.1.min(empty.1)));
    (len(inside) + len(empty) - overlap) / (u1 - u0)
}

fn shrinking_box_spec(alpha: f64, beta: f64, gamma: f64, u0: f64, u1: f64) -> ProblemSpec {
    let map = CoefficientMap::parse_descending(StabilityKind::Hurwitz, 1, 1, &["1", "2 - abs(q1 - d1)", "2", "3"]).unwrap();
    let set = UncertaintySet::ParamBox {
        lo: vec![Expression::parse(&format!("({alpha}) - d1/({beta})"), 0, 1).unwrap()],
        hi: vec![Expression::parse(&format!("({gamma}) - d1"), 0, 1).unwrap()],
    };
    let dist = DistributionSpec::new(vec![MarginalSpec::Uniform {
        lo: u0.into(),
        hi: u1.into(),
    }]);
    ProblemSpec::new(map, set, dist, ProblemKind::QofDelta).unwrap()
}

fn bounds_bracket() -> Verdict {
    let strategy = Strategy::TwoStep(Default::default());
    let original = shrinking_box_spec(1.0, 3.0, 2.0, 0.25, 1.5);
    let (lo, hi) = bounds_q_of_delta(&original, None, &strategy).unwrap();
    let mut pass = lo.value == 0.0 && hi.value == 1.0;
    let mut detail = format!("original: [{}, {}]", lo.value + 0.0, hi.value + 0.0);

    let mut rng = StdRng::seed_from_u64(12);
    let mut violations = 0;
    let mut solver_gap: f64 = 0.0;
    for _ in 0..100 {
        let (alpha, beta, gamma) = (
            rng.random_range(0.8..1.2),
            rng.random_range(2.0..4.0),
            rng.random_range(1.8..2.2),
        );
        let (u0, u1) = (rng.random_range(0.1..0.4), rng.random_range(1.3..1.7));
        let spec = shrinking_box_spec(alpha, beta, gamma, u0, u1);
        let exact = shrinking_box_exact(alpha, beta, gamma, u0, u1);
        let (lo, hi) = bounds_q_of_delta(&spec, None, &strategy).unwrap();
        if lo.value > exact + 1e-9 || hi.value < exact - 1e-9 {
            violations += 1;
        }
        let solved = solve_q_of_delta(&spec, &strategy).unwrap().value;
        solver_gap = solver_gap.max((solved - exact).abs());
    }
    pass &= violations == 0;
    detail.push_str(&format!(
        "; 100 variants, {violations} violations, two-step vs closed form within {solver_gap:.1e}"
    ));
    verdict(pass, detail)
}

fn half_plane() -> Verdict {
    let map = CoefficientMap::parse_descending(StabilityKind::Hurwitz, 1, 2, &["1", "d1 + d2 - 0.5"]).unwrap();
    let set = UncertaintySet::Box {
        lo: vec![0.0],
        hi: vec![1.0],
    };
    let u = || MarginalSpec::Uniform {
        lo: 0.0.into(),
        hi: 1.0.into(),
    };
    let spec = ProblemSpec::new(map, set, DistributionSpec::new(vec![u(), u()]), ProblemKind::QDelta).unwrap();
    let (eps, p) = (0.05, 0.875);
    let within = (0..100u64)
        .filter(|&seed| {
            let params = ScenarioParams {
                epsilon: eps,
                theta: 0.01,
                seed,
                ..Default::default()
            };
            (scenario_estimate(&spec, &params).unwrap().value - p).abs() <= eps
        })
        .count();
    let n = chernoff_sample_size(eps, 0.01).unwrap();
    verdict(within >= 99, format!("{within}/100 runs within {eps} of {p} (N = {n})"))
}

fn main() -> ExitCode {
    let criteria: Vec<(u32, &str, fn() -> Verdict)> = vec![
        (1, "gain_schur interval and probability", || example("5.1")),
        (2, "ellipse_plane two-step", || example("5.2")),
        (3, "ellipse_plane scenario, five seeds", scenario_seeds),
        (4, "abs_cubic", || example("5.3.1")),
        (5, "shrinking_box", || example("5.3.2")),
        (6, "laplace_box", || example("5.3.3")),
        (7, "worst_q", || example("5.3.4")),
        (8, "chernoff sample size", chernoff),
        (9, "stability tests vs roots", stability_oracle),
        (10, "kharitonov vs vertex grid", kharitonov_grid),
        (11, "discrete solver vs enumeration", discrete_instances),
        (12, "q_of_delta bounds bracket", bounds_bracket),
        (13, "scenario coverage on a half-plane", half_plane),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let t = Instant::now();
        let v = run();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "criterion {id:>2} {} {name} ({secs:.1} s): {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.pass && !KNOWN_UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
        if v.pass && KNOWN_UNATTAINABLE.contains(&id) {
            println!("criterion {id:>2} was expected to fail and passed");
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all attainable criteria pass; known unattainable: {KNOWN_UNATTAINABLE:?}");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        ExitCode::FAILURE
    }
}
