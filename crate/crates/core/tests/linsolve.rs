#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;
use std::sync::Arc;

use mixsing::grid::{build_grid, Grid, GridSpec};
use mixsing::linsolve::{
    dense_matrix, energy_value, green_column, principal_eigenpair, solve_dirichlet, write_grid_function_csv, LinearSolver,
    Method, MethodChoice, SolveOptions,
};
use mixsing::operator::MixedOperator;
use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn op(spec: GridSpec, s: f64) -> MixedOperator {
    MixedOperator::new(Arc::new(build_grid(spec).unwrap()), s).unwrap()
}

fn random_vec(n: usize, seed: u64, lo: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(lo..1.0)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[test]
fn solvers_match_dense_lu() {
    for (spec, s) in [(GridSpec::unit_box(2, 20), 0.5), (GridSpec::unit_ball(3, 11), 0.3)] {
        let o = op(spec, s);
        let f = random_vec(o.len(), 1, -1.0);
        let lu = dense_matrix(&o).unwrap().lu().solve(&DVector::from_column_slice(&f)).unwrap();
        let want: Vec<f64> = lu.iter().copied().collect();
        for method in [MethodChoice::Direct, MethodChoice::Iterative] {
            let opts = SolveOptions { method, tol: Some(1e-12), ..Default::default() };
            let res = LinearSolver::new(&o, None, opts).unwrap().solve(&f, None).unwrap();
            assert!(max_diff(&res.solution, &want) <= 1e-9 * sup(&want), "{spec:?} {method:?}");
        }
    }
}

#[test]
fn auto_method_by_size() {
    let small = op(GridSpec::unit_box(2, 15), 0.5);
    let large = op(GridSpec::unit_box(2, 41), 0.5);
    let pick = |o: &MixedOperator| LinearSolver::new(o, None, SolveOptions::default()).unwrap().method();
    assert_eq!(pick(&small), Method::Direct);
    assert_eq!(pick(&large), Method::ConjugateGradient);
}

#[test]
fn iterative_solve_reports_residual() {
    let o = op(GridSpec::unit_box(2, 63), 0.5);
    let f = vec![1.0; o.len()];
    let res = solve_dirichlet(&o, &f).unwrap();
    assert_eq!(res.method, Method::ConjugateGradient);
    assert!(res.relative_residual <= 1e-8);
    let au = o.apply(&res.solution).unwrap();
    assert!(max_diff(&au, &f) <= 1e-7);
    assert!(res.solution.iter().all(|v| *v > 0.0));
}

#[test]
fn shifted_system() {
    let o = op(GridSpec::unit_box(2, 40), 0.5);
    let shift = random_vec(o.len(), 2, 0.0).iter().map(|v| 50.0 * v).collect::<Vec<_>>();
    let f = random_vec(o.len(), 3, -1.0);
    let res = LinearSolver::new(&o, Some(shift.clone()), SolveOptions::with_tol(1e-11)).unwrap().solve(&f, None).unwrap();
    let mut au = o.apply(&res.solution).unwrap();
    for i in 0..au.len() {
        au[i] += shift[i] * res.solution[i];
    }
    assert!(max_diff(&au, &f) <= 1e-8 * sup(&f));
}

#[test]
fn principal_eigenvalue_matches_dense_spectrum() {
    let o = op(GridSpec::unit_box(2, 15), 0.5);
    let pair = principal_eigenpair(&o).unwrap();
    let eig = SymmetricEigen::new(dense_matrix(&o).unwrap());
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!((pair.lambda - lo).abs() <= 1e-7 * lo);
    assert!(pair.phi.iter().all(|v| *v > 0.0));
    assert!((sup(&pair.phi) - 1.0).abs() < 1e-15);
}

#[test]
fn principal_eigenvalue_above_laplacian() {
    let o = op(GridSpec::unit_box(2, 31), 0.5);
    let lambda = principal_eigenpair(&o).unwrap().lambda;
    assert!(lambda >= 2.0 * PI * PI);
}

fn all_columns(o: &MixedOperator) -> Vec<Vec<f64>> {
    (0..o.len()).map(|y| green_column(o, y).unwrap()).collect()
}

#[test]
fn green_symmetry_and_representation() {
    let o = op(GridSpec::unit_ball(2, 13), 0.4);
    let g: &Grid = o.grid();
    let cols = all_columns(&o);
    let gmax = cols.iter().flatten().cloned().fold(0.0, f64::max);
    for x in 0..g.len() {
        for y in 0..g.len() {
            assert!(cols[y][x] > 0.0);
            assert!((cols[y][x] - cols[x][y]).abs() <= 1e-10 * gmax);
        }
    }
    let f = random_vec(g.len(), 4, -1.0);
    let u = solve_dirichlet(&o, &f).unwrap().solution;
    let vol = g.cell_volume();
    for x in 0..g.len() {
        let rep: f64 = (0..g.len()).map(|y| cols[y][x] * f[y] * vol).sum();
        assert!((rep - u[x]).abs() <= 1e-9 * sup(&u));
    }
}

#[test]
fn green_column_rejects_bad_source() {
    let o = op(GridSpec::unit_box(2, 7), 0.5);
    assert!(green_column(&o, o.len()).is_err());
}

#[test]
fn solution_minimizes_energy() {
    let o = op(GridSpec::unit_box(2, 17), 0.6);
    let f = random_vec(o.len(), 5, 0.0);
    let u = solve_dirichlet(&o, &f).unwrap().solution;
    let e0 = energy_value(&o, &u, &f).unwrap();
    let vol = o.grid().cell_volume();
    let fu: f64 = f.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() * vol;
    assert!((e0 + 0.5 * fu).abs() <= 1e-10 * fu);
    for seed in 0..5 {
        let v = random_vec(o.len(), 100 + seed, -1.0);
        for eps in [1e-3, 1e-1, 1.0] {
            let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
            assert!(energy_value(&o, &w, &f).unwrap() > e0);
        }
    }
}

#[test]
fn size_mismatch_is_an_error() {
    let o = op(GridSpec::unit_box(2, 7), 0.5);
    assert!(solve_dirichlet(&o, &[1.0; 3]).is_err());
}

#[test]
fn grid_function_csv() {
    let g = build_grid(GridSpec::unit_box(2, 3)).unwrap();
    let mut buf = Vec::new();
    write_grid_function_csv(&g, &vec![2.0; g.len()], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,delta,value"));
    assert_eq!(lines.count(), 9);
}
