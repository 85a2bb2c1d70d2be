use mixedrobust::mixed::{
    probability_at_q, scenario_estimate, solve_delta_of_q, ProblemKind, ProblemSpec, QGridParams, RegionParams,
    ScenarioParams,
};
use mixedrobust::param::{DistributionSpec, MarginalSpec, UncertaintySet};
use mixedrobust::poly::{Polynomial, StabilityKind};
use mixedrobust::robust::{
    indicator_f, necessary_indicator, sufficient_indicator, CoefficientMap, RobustMethod,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn affine_family(rng: &mut StdRng, degree: usize) -> (CoefficientMap, UncertaintySet) {
    let text: Vec<String> = (0..=degree)
        .map(|j| {
            let c: f64 = if j == 0 { rng.random_range(0.8..1.2) } else { rng.random_range(0.5..4.0) };
            let a: f64 = rng.random_range(-0.5..0.5);
            let b: f64 = rng.random_range(-0.5..0.5);
            format!("({c}) + ({a})*q1 + ({b})*q2 + 0*d1")
        })
        .collect();
    let map = CoefficientMap::parse_descending(StabilityKind::Hurwitz, 2, 1, &text).unwrap();
    let w: f64 = rng.random_range(0.1..1.0);
    (
        map,
        UncertaintySet::Box {
            lo: vec![-w, -w],
            hi: vec![w, w],
        },
    )
}

#[test]
fn sandwich_holds() {
    let mut rng = StdRng::seed_from_u64(1);
    let mut counts = [0usize; 3];
    for i in 0..500 {
        let (map, set) = affine_family(&mut rng, 2 + i % 4);
        let suff = sufficient_indicator(&map, &set, &[0.0]).unwrap();
        let exact = indicator_f(&map, &set, &[0.0], RobustMethod::Auto).unwrap().robust;
        let nec = necessary_indicator(&map, &set, &[0.0]).unwrap();
        assert!(!suff || exact, "sufficient but not robust at instance {i}");
        assert!(!exact || nec, "robust but necessary condition fails at instance {i}");
        counts[0] += usize::from(suff);
        counts[1] += usize::from(exact);
        counts[2] += usize::from(nec);
    }
    assert!(counts[1] > 50 && counts[1] < 450, "{counts:?}");
}

#[test]
fn zero_exclusion_implies_grid() {
    let mut rng = StdRng::seed_from_u64(2);
    for i in 0..200 {
        let (map, set) = affine_family(&mut rng, 2 + i % 5);
        let ze = indicator_f(
            &map,
            &set,
            &[0.0],
            RobustMethod::ZeroExclusion {
                omega_max: None,
                omega_points: 1024,
            },
        )
        .unwrap()
        .robust;
        let grid = indicator_f(&map, &set, &[0.0], RobustMethod::GridFallback { resolution: 9 })
            .unwrap()
            .robust;
        assert!(!ze || grid, "zero exclusion robust but a grid point is unstable at instance {i}");
    }
}

fn disk_spec() -> ProblemSpec {
    // stable iff d1^2 + d2^2 < 1
    let map = CoefficientMap::parse_descending(StabilityKind::Hurwitz, 1, 2, &["1", "1 - d1*d1 - d2*d2 + 0*q1"]).unwrap();
    let u = || MarginalSpec::Uniform {
        lo: (-1.5).into(),
        hi: 1.5.into(),
    };
    ProblemSpec::new(
        map,
        UncertaintySet::Box {
            lo: vec![0.0],
            hi: vec![0.0],
        },
        DistributionSpec::new(vec![u(), u()]),
        ProblemKind::QDelta,
    )
    .unwrap()
}

#[test]
fn refinement_tightens_bracket() {
    let spec = disk_spec();
    let exact = std::f64::consts::PI / 9.0;
    let mut last = f64::INFINITY;
    for depth in 0..3 {
        let params = RegionParams {
            resolution: 64,
            refine_depth: depth,
            ..Default::default()
        };
        let e = probability_at_q(&spec, &[0.0], &params).unwrap();
        let (lo, hi) = e.bracket().unwrap();
        assert!(lo <= exact && exact <= hi, "depth {depth}: [{lo}, {hi}]");
        assert!(hi - lo <= last + 1e-15, "depth {depth}");
        last = hi - lo;
    }
}

#[test]
fn scenario_independent_of_thread_count() {
    let spec = disk_spec();
    let params = ScenarioParams {
        epsilon: 0.02,
        theta: 1e-3,
        seed: 42,
        ..Default::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| scenario_estimate(&spec, &params).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn worst_q_below_probed_points() {
    let map = CoefficientMap::parse_descending(StabilityKind::Hurwitz, 1, 1, &["1", "2 - abs(q1 - d1)", "2", "3"]).unwrap();
    let dist = DistributionSpec::new(vec![MarginalSpec::Normal {
        mean: mixedrobust::param::Param::Expr(mixedrobust::expr::Expression::parse("1.4 - 0.5*q1", 1, 0).unwrap()),
        std: mixedrobust::param::Param::Expr(mixedrobust::expr::Expression::parse("q1/8", 1, 0).unwrap()),
    }]);
    let spec = ProblemSpec::new(
        map,
        UncertaintySet::Box {
            lo: vec![0.7],
            hi: vec![1.1],
        },
        dist,
        ProblemKind::DeltaOfQ,
    )
    .unwrap();
    let params = QGridParams {
        resolution: 9,
        ..Default::default()
    };
    let min = solve_delta_of_q(&spec, &params).unwrap();
    for k in 0..=8 {
        let q = 0.7 + 0.05 * k as f64;
        let p = probability_at_q(&spec, &[q], &params.region).unwrap().value;
        assert!(min.value <= p + 1e-12, "q = {q}: {p} < {}", min.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn routh_matches_roots(coeffs in prop::collection::vec(0.05f64..3.0, 2..9)) {
        let p = Polynomial::new(coeffs);
        let margin = p.stability_margin(StabilityKind::Hurwitz).unwrap();
        prop_assume!(margin.abs() > 1e-6);
        prop_assert_eq!(p.is_hurwitz().unwrap(), margin > 0.0);
    }

    #[test]
    fn schur_matches_roots(coeffs in prop::collection::vec(-1.0f64..1.0, 2..9)) {
        let p = Polynomial::new(coeffs);
        prop_assume!(p.coeffs().last().unwrap().abs() > 1e-3);
        let margin = p.stability_margin(StabilityKind::Schur).unwrap();
        prop_assume!(margin.abs() > 1e-6);
        prop_assert_eq!(p.is_schur().unwrap(), margin > 0.0);
    }

    #[test]
    fn robust_over_box_implies_robust_over_subbox(w in 0.01f64..1.0, shrink in 0.0f64..1.0, seed in 0u64..1000) {
        let mut rng = StdRng::seed_from_u64(seed);
        let (map, _) = affine_family(&mut rng, 3);
        let outer = UncertaintySet::Box { lo: vec![-w, -w], hi: vec![w, w] };
        let v = w * shrink;
        let inner = UncertaintySet::Box { lo: vec![-v, -v], hi: vec![v, v] };
        let a = indicator_f(&map, &outer, &[0.0], RobustMethod::Auto).unwrap().robust;
        let b = indicator_f(&map, &inner, &[0.0], RobustMethod::Auto).unwrap().robust;
        prop_assert!(!a || b);
    }
}
