use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// Number of full periods integrated numerically before the asymptotic tail.
const PERIODS: usize = 200;

/// `J(s) = ∫_0^∞ (1 − cos t) t^{−1−2s} dt`.
pub(crate) fn radial_integral(s: f64) -> f64 {
    // [0, 1]: termwise integration of the cosine series.
    let mut head = 0.0;
    let mut term = 1.0; // t^{2k}/(2k)! coefficient
    for k in 1..40 {
        let kk = k as f64;
        term /= (2.0 * kk - 1.0) * (2.0 * kk);
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        head += sign * term / (2.0 * kk - 2.0 * s);
        if term < 1e-18 {
            break;
        }
    }

    let a = 1.0 + 2.0 * s;
    let f = |t: f64| (1.0 - t.cos()) * t.powf(-a);
    let two_pi = 2.0 * PI;
    let mut body = integrate(f, 1.0, two_pi, 1e-14);
    for k in 1..PERIODS {
        let lo = two_pi * k as f64;
        body += integrate(f, lo, lo + two_pi, 1e-15);
    }

    // Tail beyond A: ∫ t^{-a} minus the cosine part by repeated integration by parts.
    let big = two_pi * PERIODS as f64;
    let (sin_a, cos_a) = big.sin_cos();
    let cos_tail = -sin_a * big.powf(-a) + a * cos_a * big.powf(-a - 1.0)
        + a * (a + 1.0) * sin_a * big.powf(-a - 2.0)
        - a * (a + 1.0) * (a + 2.0) * cos_a * big.powf(-a - 3.0);
    let tail = big.powf(-2.0 * s) / (2.0 * s) - cos_tail;

    head + body + tail
}

/// `∫_{S^{N−1}} |θ₁|^{2s} dσ(θ)`.
pub(crate) fn angular_factor(dim: usize, s: f64) -> f64 {
    match dim {
        1 => 2.0,
        2 => 4.0 * integrate(|p: f64| p.cos().max(0.0).powf(2.0 * s), 0.0, PI / 2.0, 1e-14),
        3 => 4.0 * PI / (2.0 * s + 1.0),
        _ => unreachable!("dimension checked by caller"),
    }
}

/// `∫_{ℝ^N} (1 − cos ξ₁)/|ξ|^{N+2s} dξ`, evaluated in polar form.
pub fn cosine_integral(dim: usize, s: f64) -> Result<f64> {
    check(dim, s)?;
    Ok(radial_integral(s) * angular_factor(dim, s))
}

/// Normalizing constant `C(N,s)` of the fractional Laplacian.
pub fn normalizing_constant(dim: usize, s: f64) -> Result<f64> {
    Ok(1.0 / cosine_integral(dim, s)?)
}

fn check(dim: usize, s: f64) -> Result<()> {
    if !(1..=3).contains(&dim) {
        return Err(Error::Parameter(format!("dimension {dim} outside 1..=3")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Parameter(format!("order s = {s} outside (0,1)")));
    }
    Ok(())
}

/// Surface measure of the unit sphere `S^{N−1}`.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}
