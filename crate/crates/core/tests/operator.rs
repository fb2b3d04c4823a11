use std::f64::consts::PI;
use std::sync::Arc;

use mixsing::grid::{build_grid, Grid, GridSpec, Shape};
use mixsing::operator::{
    cosine_integral, dirichlet_energy, lattice_sum, normalizing_constant, read_dense_dump, sphere_area,
    write_dense_dump, FractionalParams, MixedOperator, StorageMode,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

fn closed_form_constant(dim: usize, s: f64) -> f64 {
    let n = dim as f64;
    s * 4f64.powf(s) * gamma((n + 2.0 * s) / 2.0) / (PI.powf(n / 2.0) * gamma(1.0 - s))
}

fn grid(spec: GridSpec) -> Arc<Grid> {
    Arc::new(build_grid(spec).unwrap())
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Membership of lattice index `idx` (coordinates `(idx+1)h` shifted to the
/// domain), decided in integer arithmetic.
fn inside(shape: Shape, dim: usize, m: i64, idx: [i64; 3]) -> bool {
    match shape {
        Shape::Box => (0..dim).all(|a| idx[a] >= 0 && idx[a] < m),
        Shape::Ball => (0..dim).map(|a| (2 * (idx[a] + 1) - (m + 1)).pow(2)).sum::<i64>() < (m + 1).pow(2),
    }
}

/// Zero-extended double sum `½ Σ_{x≠y} w (u_x − u_y)² h^N` over the lattice
/// inside `B_R`, plus the analytic far field for each interior node.
fn brute_fractional_energy(g: &Grid, s: f64, u: &[f64]) -> f64 {
    let dim = g.dim();
    let h = g.spacing();
    let c = closed_form_constant(dim, s);
    let radius = 4.0 * g.diameter();
    let kmax = (radius / h).floor() as i64;
    let e = dim as f64 + 2.0 * s;
    let far = c * sphere_area(dim) * radius.powf(-2.0 * s) / (2.0 * s);
    let vol = g.cell_volume();
    let third = if dim == 3 { kmax } else { 0 };
    let mut pair = 0.0;
    let mut tail = 0.0;
    let m = g.resolution() as i64;
    for i in 0..g.len() {
        let lat = g.lattice_index(i);
        let mut exterior = 0.0;
        for a in -kmax..=kmax {
            for b in -kmax..=kmax {
                for cc in -third..=third {
                    let r2 = (a * a + b * b + cc * cc) as f64;
                    if r2 == 0.0 || r2.sqrt() * h > radius {
                        continue;
                    }
                    let w = c * h.powf(-2.0 * s) * r2.powf(-e / 2.0);
                    let y = [lat[0] as i64 + a, lat[1] as i64 + b, lat[2] as i64 + cc];
                    if inside(g.shape(), dim, m, y) {
                        let j = g
                            .node_at([y[0] as isize, y[1] as isize, y[2] as isize])
                            .expect("interior lattice point is a node");
                        pair += 0.5 * w * (u[i] - u[j]).powi(2);
                    } else {
                        exterior += w;
                    }
                }
            }
        }
        tail += (exterior + far) * u[i] * u[i];
    }
    (pair + tail) * vol
}

#[test]
fn fractional_energy_matches_double_sum() {
    for (spec, s) in [
        (GridSpec::unit_box(2, 7), 0.5),
        (GridSpec::unit_box(2, 9), 0.3),
        (GridSpec::unit_ball(2, 11), 0.75),
        (GridSpec::unit_ball(3, 7), 0.5),
    ] {
        let g = grid(spec);
        let op = MixedOperator::new(g.clone(), s).unwrap();
        let u = random_vec(g.len(), 3);
        let got = op.fractional_energy(&u).unwrap();
        let want = brute_fractional_energy(&g, s, &u);
        assert!((got - want).abs() <= 1e-10 * want, "{spec:?} s={s}: {got} vs {want}");
    }
}

#[test]
fn energy_splits_into_local_and_fractional() {
    for spec in [GridSpec::unit_box(2, 17), GridSpec::unit_ball(3, 9)] {
        let g = grid(spec);
        let op = MixedOperator::new(g.clone(), 0.4).unwrap();
        let u = random_vec(g.len(), 9);
        let total = op.energy(&u).unwrap();
        let local = op.local_energy(&u).unwrap();
        let dirichlet = dirichlet_energy(&g, &u).unwrap();
        let frac = op.fractional_energy(&u).unwrap();
        assert!((local - dirichlet).abs() <= 1e-12 * local);
        assert!((total - local - frac).abs() <= 1e-10 * total);
    }
}

#[test]
fn discrete_sine_is_local_eigenvector() {
    for dim in [2, 3] {
        let g = grid(GridSpec::unit_box(dim, 15));
        let op = MixedOperator::new(g.clone(), 0.5).unwrap();
        let u = g.sample(|x, _| (0..dim).map(|a| (PI * x[a]).sin()).product());
        let h = g.spacing();
        let lambda = dim as f64 * 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let au = op.apply_local(&u).unwrap();
        for (a, v) in au.iter().zip(&u) {
            assert!((a - lambda * v).abs() < 1e-9 * lambda);
        }
    }
}

#[test]
fn dense_and_matrix_free_agree() {
    for (spec, s) in [
        (GridSpec::unit_box(2, 21), 0.5),
        (GridSpec::unit_ball(2, 24), 0.2),
        (GridSpec::unit_ball(3, 11), 0.8),
        (GridSpec::unit_box(3, 8), 0.6),
    ] {
        let g = grid(spec);
        let p = FractionalParams::for_grid(&g, s).unwrap();
        let dense = MixedOperator::with_params(g.clone(), p, StorageMode::Dense).unwrap();
        let free = MixedOperator::with_params(g.clone(), p, StorageMode::MatrixFree).unwrap();
        let u = random_vec(g.len(), 5);
        let a = dense.apply(&u).unwrap();
        let b = free.apply(&u).unwrap();
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * scale, "{spec:?}");
        }
    }
}

#[test]
fn normalizing_constant_known_values() {
    assert!((normalizing_constant(1, 0.5).unwrap() - 1.0 / PI).abs() < 1e-12);
    assert!((normalizing_constant(3, 0.5).unwrap() - 1.0 / (PI * PI)).abs() < 1e-12);
    assert!(normalizing_constant(2, 1.0).is_err());
    assert!(normalizing_constant(4, 0.5).is_err());
}

#[test]
fn lattice_sum_matches_enumeration() {
    for (dim, s, k) in [(2, 0.5, 10.0), (3, 0.25, 6.5), (2, 0.9, 7.3)] {
        let kk = k as i64;
        let third = if dim == 3 { kk } else { 0 };
        let mut want = 0.0;
        for a in -kk..=kk {
            for b in -kk..=kk {
                for c in -third..=third {
                    let r2 = (a * a + b * b + c * c) as f64;
                    if r2 > 0.0 && r2 <= k * k {
                        want += r2.powf(-(dim as f64 + 2.0 * s) / 2.0);
                    }
                }
            }
        }
        let got = lattice_sum(dim, s, k);
        assert!((got - want).abs() < 1e-12 * want);
    }
}

#[test]
fn dump_round_trip() {
    let g = grid(GridSpec::unit_box(2, 7));
    let op = MixedOperator::new(g, 0.5).unwrap();
    let mut buf = Vec::new();
    write_dense_dump(&op, &mut buf).unwrap();
    assert_eq!(buf.len(), 24 + 8 * 49 * 49);
    let (head, a) = read_dense_dump(buf.as_slice()).unwrap();
    assert_eq!((head.dim, head.resolution, head.order), (2, 7, 0.5));
    for i in 0..49 {
        for j in 0..49 {
            assert_eq!(a[(i, j)], op.entry(i, j));
        }
    }
    assert!(read_dense_dump(&buf[..30]).is_err());
}

#[test]
fn short_cutoff_is_rejected() {
    let g = grid(GridSpec::unit_box(2, 7));
    let mut p = FractionalParams::for_grid(&g, 0.5).unwrap();
    assert_eq!(p.cutoff_radius, 4.0 * g.diameter());
    p.cutoff_radius = 1.5 * g.diameter();
    assert!(MixedOperator::with_params(g, p, StorageMode::MatrixFree).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constant_matches_gamma_form(dim in 1usize..=3, s in 0.02f64..0.98) {
        let got = normalizing_constant(dim, s).unwrap();
        let want = closed_form_constant(dim, s);
        prop_assert!((got / want - 1.0).abs() < 1e-9, "N={} s={}: {} vs {}", dim, s, got, want);
        prop_assert!((got * cosine_integral(dim, s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_m_matrix(s in 0.05f64..0.95, m in 5usize..12, ball in any::<bool>(), dim in 2usize..=3) {
        let spec = if ball { GridSpec::unit_ball(dim, m) } else { GridSpec::unit_box(dim, m) };
        let g = grid(spec);
        let op = MixedOperator::new(g.clone(), s).unwrap();
        let a = op.assemble_dense().unwrap();
        let n = a.nrows();
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                prop_assert_eq!(a[(i, j)], a[(j, i)]);
                if i != j {
                    prop_assert!(a[(i, j)] < 0.0);
                }
                row += a[(i, j)];
            }
            prop_assert!(row > 0.0);
        }
        prop_assert!(a.cholesky().is_some());
    }

    #[test]
    fn energy_is_positive(seed in any::<u64>()) {
        let g = grid(GridSpec::unit_box(2, 11));
        let op = MixedOperator::new(g.clone(), 0.5).unwrap();
        let u = random_vec(g.len(), seed);
        let e = op.energy(&u).unwrap();
        let lower = op.fractional_energy(&u).unwrap();
        prop_assert!(e > lower && lower > 0.0);
    }
}
