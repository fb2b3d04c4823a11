//! Discrete norms and moments on a grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::operator::{assemble_local, dirichlet_energy, MixedOperator};
use crate::vecops::dot;

/// `Σ |∇_h(u^α)|² h^N`, forward differences, zero exterior.
pub fn h1_power_norm(u: &[f64], alpha: f64, grid: &Grid) -> Result<f64> {
    check_len(grid.len(), u.len())?;
    if !(alpha > 0.0) {
        return Err(Error::Parameter(format!("power α = {alpha} must be positive")));
    }
    if u.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Parameter("h1_power_norm needs u ≥ 0".into()));
    }
    let v: Vec<f64> = u.iter().map(|x| x.powf(alpha)).collect();
    dirichlet_energy(grid, &v)
}

/// Fractional energy `uᵀA_frac u h^N`.
pub fn gagliardo_seminorm(op: &MixedOperator, u: &[f64]) -> Result<f64> {
    op.fractional_energy(u)
}

/// `Σ |u|^p h^N` (`max |u|` for `p = ∞`).
pub fn lebesgue_integral(u: &[f64], p: f64, grid: &Grid) -> Result<f64> {
    check_len(grid.len(), u.len())?;
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("exponent p = {p} below 1")));
    }
    if p.is_infinite() {
        return Ok(u.iter().fold(0.0, |m, x| m.max(x.abs())));
    }
    Ok(u.iter().map(|x| x.abs().powf(p)).sum::<f64>() * grid.cell_volume())
}

/// `(Σ |u|^p h^N)^{1/p}`, or `max |u|` for `p = ∞`.
pub fn lebesgue_norm(u: &[f64], p: f64, grid: &Grid) -> Result<f64> {
    let v = lebesgue_integral(u, p, grid)?;
    Ok(if p.is_infinite() { v } else { v.powf(1.0 / p) })
}

/// Exponent arguments are capped here to keep the sum finite.
pub const EXP_CAP: f64 = 700.0;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExpMoment {
    pub value: f64,
    pub capped: bool,
}

/// `Σ exp(β N u/(N−2)) h^N`.
pub fn exp_moment(u: &[f64], beta: f64, grid: &Grid) -> Result<ExpMoment> {
    check_len(grid.len(), u.len())?;
    let n = grid.dim() as f64;
    if grid.dim() <= 2 {
        return Err(Error::Parameter("exponential moment needs N > 2".into()));
    }
    let k = beta * n / (n - 2.0);
    let mut capped = false;
    let mut total = 0.0;
    for x in u {
        let mut a = k * x;
        if a > EXP_CAP {
            a = EXP_CAP;
            capped = true;
        }
        total += a.exp();
    }
    Ok(ExpMoment { value: total * grid.cell_volume(), capped })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SobolevEstimate {
    /// `S ≈ sup ‖u‖²_{2*} / ‖∇u‖²`.
    pub constant: f64,
    /// Smallest Rayleigh quotient `‖∇u‖² / ‖u‖²_{2*}` found.
    pub min_quotient: f64,
}

pub const SOBOLEV_STARTS: usize = 50;
const SOBOLEV_STEPS: usize = 400;

/// Minimal discrete Rayleigh quotient of the embedding `H¹₀ ⊂ L^{2*}` by
/// projected gradient descent from seeded random starts.
pub fn sobolev_constant(grid: &Grid, starts: usize, seed: u64) -> Result<SobolevEstimate> {
    if grid.dim() <= 2 {
        return Err(Error::Parameter("Sobolev exponent 2* is finite only for N > 2".into()));
    }
    let n = grid.dim() as f64;
    let p = 2.0 * n / (n - 2.0);
    let vol = grid.cell_volume();
    let loc = assemble_local(grid);
    let len = grid.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lu = vec![0.0; len];

    let quotient = |u: &[f64], lu: &mut Vec<f64>| -> (f64, f64, f64) {
        loc.apply(u, lu);
        let e = dot(u, lu) * vol;
        let np = u.iter().map(|x| x.abs().powf(p)).sum::<f64>() * vol;
        let n2 = np.powf(2.0 / p);
        (e / n2, e, n2)
    };

    let mut best = f64::INFINITY;
    for _ in 0..starts.max(1) {
        let mut u: Vec<f64> = grid.delta().iter().map(|d| d * rng.random_range(0.05..1.0)).collect();
        let mut step = 1.0;
        let (mut q, mut e, mut n2) = quotient(&u, &mut lu);
        for _ in 0..SOBOLEV_STEPS {
            let np = n2.powf(p / 2.0);
            // ∇Q = (∇E − Q ∇N2) / N2, ∇E = 2 A_loc u h^N, ∇N2 = 2 N2 np^{-1} |u|^{p−2} u h^N
            let grad: Vec<f64> = u
                .iter()
                .zip(&lu)
                .map(|(x, l)| (2.0 * l * vol - q * 2.0 * n2 / np * x.abs().powf(p - 2.0) * x * vol) / n2)
                .collect();
            let gn = dot(&grad, &grad).sqrt();
            if gn == 0.0 {
                break;
            }
            let unorm = dot(&u, &u).sqrt();
            let mut accepted = false;
            for _ in 0..30 {
                let t = step * unorm / gn;
                let trial: Vec<f64> = u.iter().zip(&grad).map(|(x, g)| (x - t * g).abs()).collect();
                let mut lt = vec![0.0; len];
                let (qt, et, n2t) = quotient(&trial, &mut lt);
                if qt < q {
                    u = trial;
                    lu = lt;
                    q = qt;
                    e = et;
                    n2 = n2t;
                    step *= 1.5;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
            // renormalize to ‖u‖_{2*} = 1
            let scale = n2.sqrt().recip();
            u.iter_mut().for_each(|x| *x *= scale);
            lu.iter_mut().for_each(|x| *x *= scale);
            e *= scale * scale;
            n2 = 1.0;
            q = e;
        }
        best = best.min(q);
    }
    Ok(SobolevEstimate { constant: 1.0 / best, min_quotient: best })
}

/// Largest `β` with `β·max{1, (β/γ)^γ} ≤ 2/(S‖f‖_{N/2})` (`β ≤ 2/(S‖f‖)` for `γ = 0`).
pub fn admissible_beta(sobolev: f64, f_norm: f64, gamma: f64) -> Result<f64> {
    if !(sobolev > 0.0 && f_norm > 0.0) {
        return Err(Error::Parameter("Sobolev constant and datum norm must be positive".into()));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Regime(format!("exponential moments need γ ∈ [0,1], got {gamma}")));
    }
    let bound = 2.0 / (sobolev * f_norm);
    if gamma == 0.0 {
        return Ok(bound);
    }
    let g = |b: f64| b * (b / gamma).powf(gamma).max(1.0);
    let (mut lo, mut hi) = (0.0, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= bound {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
