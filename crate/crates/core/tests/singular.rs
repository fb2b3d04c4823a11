use std::sync::Arc;

use mixsing::grid::{build_grid, Grid, GridSpec};
use mixsing::linsolve::solve_dirichlet;
use mixsing::operator::MixedOperator;
use mixsing::singular::{
    continuation_solve, default_schedule, detect_nonexistence, regularize_weight, solve_regularized, Flag,
    NonlinearMethod, Regularization, SingularProblem, WeightSpec, SCHEMA_VERSION,
};
use mixsing::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(m: usize) -> Arc<Grid> {
    Arc::new(build_grid(GridSpec::unit_box(2, m)).unwrap())
}

fn singular(m: usize, gamma: f64, zeta: f64) -> SingularProblem {
    SingularProblem::new(grid(m), 0.5, gamma, WeightSpec::SingularPower { zeta }).unwrap()
}

#[test]
fn linear_problem_single_solve_per_stage() {
    let g = grid(15);
    let p = SingularProblem::new(g.clone(), 0.5, 0.0, WeightSpec::constant(&g, 1.0)).unwrap();
    let report = continuation_solve(&p).unwrap();
    assert_eq!(report.flag, Flag::Converged);
    assert_eq!(report.stages.len(), default_schedule().len());
    for s in &report.stages {
        assert_eq!(s.iterations, 1);
        assert_eq!(s.method, NonlinearMethod::Linear);
    }
    let direct = solve_dirichlet(&p.op, &vec![1.0; g.len()]).unwrap().solution;
    let diff = direct.iter().zip(&report.solution).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff < 1e-10);
}

#[test]
fn regularized_equation_is_solved() {
    let p = singular(15, 1.0, 1.5);
    let u0 = vec![0.1; p.grid().len()];
    let sol = solve_regularized(&p, 64, &u0).unwrap();
    let f = regularize_weight(&p.weight, p.grid(), 64, 1.0).unwrap();
    let au = p.op.apply(&sol.u).unwrap();
    let fmax = f.iter().cloned().fold(0.0, f64::max);
    for i in 0..au.len() {
        let rhs = f[i] / (sol.u[i] + 1.0 / 64.0);
        assert!((au[i] - rhs).abs() <= 1e-8 * fmax);
    }
    assert!(sol.min_u > 0.0);
}

#[test]
fn continuation_is_monotone_with_positive_hopf_margin() {
    for (gamma, zeta) in [(1.0, 1.5), (0.25, 0.25), (0.5, 0.5), (2.0, 1.0)] {
        let report = continuation_solve(&singular(15, gamma, zeta)).unwrap();
        assert_eq!(report.flag, Flag::Converged, "γ={gamma} ζ={zeta}");
        assert!(report.monotonicity_margin.unwrap() >= -1e-10);
        for w in report.stages.windows(2) {
            assert!(w[1].sup_u >= w[0].sup_u - 1e-12);
        }
        let hopf = report.hopf_history();
        assert!(hopf.iter().all(|c| *c > 0.0));
        assert!(report.hopf_constant > 0.0);
        let block = &report.exponent_fit;
        assert!(block.predicted.is_some());
        match &block.fit {
            Some(fit) => assert!(fit.exponent.is_finite()),
            None => assert!(block.error.is_some()),
        }
    }
}

#[test]
fn comparison_principle() {
    let g = grid(11);
    let op = Arc::new(MixedOperator::new(g.clone(), 0.5).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..3 {
        let f: Vec<f64> = (0..g.len()).map(|_| rng.random_range(0.0..2.0)).collect();
        let gg: Vec<f64> = f.iter().map(|v| v + rng.random_range(0.0..1.0)).collect();
        let pf = SingularProblem::with_operator(op.clone(), 0.7, WeightSpec::Lebesgue { values: f, r: 2.0 }).unwrap();
        let pg = SingularProblem::with_operator(op.clone(), 0.7, WeightSpec::Lebesgue { values: gg, r: 2.0 }).unwrap();
        let u = continuation_solve(&pf).unwrap().solution;
        let v = continuation_solve(&pg).unwrap().solution;
        assert!(u.iter().zip(&v).all(|(a, b)| *a <= b + 1e-8));
    }
}

#[test]
fn report_json() {
    let report = continuation_solve(&singular(9, 1.0, 0.5)).unwrap();
    let text = report.to_json().unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema_version"], SCHEMA_VERSION);
    assert_eq!(v["flag"], "CONVERGED");
    assert!(v.get("solution").is_none());
    assert_eq!(v["problem"]["resolution"], 9);
    let again = continuation_solve(&singular(9, 1.0, 0.5)).unwrap().to_json().unwrap();
    assert_eq!(text, again);
}

#[test]
fn excluded_and_invalid_parameters() {
    let g = grid(9);
    let err = SingularProblem::new(g.clone(), 0.5, 0.0, WeightSpec::Lebesgue { values: vec![1.0; g.len()], r: 1.0 })
        .unwrap_err();
    assert!(matches!(err, Error::Regime(_)));
    assert!(err.to_string().contains("(r,γ)=(1,0) excluded"));
    assert!(SingularProblem::new(g.clone(), 0.5, 1.0, WeightSpec::SingularPower { zeta: 2.2 }).is_err());
    assert!(SingularProblem::new(g.clone(), 0.5, 0.0, WeightSpec::SingularPower { zeta: 0.5 }).is_err());
    assert!(SingularProblem::new(g.clone(), 0.5, -1.0, WeightSpec::constant(&g, 1.0)).is_err());
    assert!(SingularProblem::new(g.clone(), 0.5, 1.0, WeightSpec::Lebesgue { values: vec![-1.0; g.len()], r: 2.0 }).is_err());
    assert!(SingularProblem::new(g.clone(), 0.5, 1.0, WeightSpec::Lebesgue { values: vec![1.0; 3], r: 2.0 }).is_err());
    let mut p = singular(9, 1.0, 0.5);
    p.schedule = vec![4, 2];
    assert!(continuation_solve(&p).is_err());
}

#[test]
fn failed_stage_returns_partial_report() {
    let mut p = singular(9, 1.0, 1.5);
    p.tolerances.max_newton = 0;
    p.tolerances.max_picard = 1;
    p.tolerances.newton = 1e-15;
    match continuation_solve(&p) {
        Err(Error::Continuation { partial, .. }) => assert_eq!(partial.flag, Flag::Diverging),
        other => panic!("expected a continuation error, got {:?}", other.map(|r| r.flag)),
    }
}

#[test]
fn nonexistence_ladder() {
    let op = Arc::new(MixedOperator::new(grid(7), 0.5).unwrap());
    let p = SingularProblem::for_nonexistence(op.clone(), 1.0, 2.2).unwrap();
    assert_eq!(p.regularization, Regularization::Truncation);
    let report = detect_nonexistence(&p).unwrap();
    assert_eq!(report.flag, Flag::Nonexistent);
    let ladder = report.ladder.as_ref().unwrap();
    assert_eq!(ladder.levels.iter().map(|l| l.resolution).collect::<Vec<_>>(), vec![7, 15, 31]);
    assert!(ladder.growth_rule && ladder.trace_rule);
    let fmax = 32f64.powf(2.2);
    assert!(ladder.levels[2].final_n as f64 >= fmax);

    let control = SingularProblem::for_nonexistence(op, 1.0, 1.5).unwrap();
    let report = detect_nonexistence(&control).unwrap();
    assert_eq!(report.flag, Flag::Converged);
}

#[test]
fn nonexistence_needs_singular_weight() {
    let g = grid(7);
    let p = SingularProblem::new(g.clone(), 0.5, 1.0, WeightSpec::constant(&g, 1.0)).unwrap();
    assert!(detect_nonexistence(&p).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn regularized_weight_increases_in_n(gamma in 0.1f64..3.0, zeta in 0.0f64..1.99, n in 1u64..512) {
        let g = grid(9);
        let w = WeightSpec::SingularPower { zeta };
        let a = regularize_weight(&w, &g, n, gamma).unwrap();
        let b = regularize_weight(&w, &g, 2 * n, gamma).unwrap();
        for ((x, y), d) in a.iter().zip(&b).zip(g.delta()) {
            prop_assert!(*x <= *y);
            prop_assert!(*y <= d.powf(-zeta) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn truncated_weight_is_capped(n in 1u64..100, scale in 0.1f64..50.0) {
        let g = grid(9);
        let values: Vec<f64> = g.delta().iter().map(|d| scale / d).collect();
        let w = WeightSpec::Lebesgue { values: values.clone(), r: 1.5 };
        let f = regularize_weight(&w, &g, n, 1.0).unwrap();
        for (a, b) in f.iter().zip(&values) {
            prop_assert_eq!(*a, b.min(n as f64));
        }
    }
}
