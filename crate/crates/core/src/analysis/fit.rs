//! Boundary exponent estimation along the midline ray.
//!
//! Two estimators are provided. [`fit_boundary_exponent_with`] regresses a
//! single solution over a window of distances. [`refinement_exponent`] uses a
//! nested pair of grids `(m, 2m+1)`: the secant `log₂(u_c(kh_c)/u_f(kh_f))`
//! compares values at the same lattice depth, so grid-scale errors that are
//! self-similar in `δ/h` cancel, and the remaining smooth corrections are
//! regressed out.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;

use super::formulas::BoundaryPrediction;

pub const MIN_FIT_POINTS: usize = 8;
/// R² below this marks a single-solution fit unreliable.
pub const RELIABLE_R2: f64 = 0.98;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    /// `u ≈ A δ^κ`; estimates `κ`.
    Power,
    /// `u ≈ A δ ln^μ(D/δ)`; estimates `μ`.
    LogCorrected,
}

/// Extra regressor in a fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "order", rename_all = "kebab-case")]
pub enum Correction {
    /// `δ^θ`
    Power(f64),
    /// `1 / ln(D/δ)`
    InverseLog,
}

impl Correction {
    pub fn order(&self) -> f64 {
        match self {
            Correction::Power(t) => *t,
            Correction::InverseLog => 0.0,
        }
    }

    fn eval(&self, delta: f64, diameter: f64) -> f64 {
        match self {
            Correction::Power(t) => delta.powf(*t),
            Correction::InverseLog => 1.0 / (diameter / delta).ln(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    SingleSolution,
    Refinement,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub mode: FitMode,
    pub points: usize,
    pub reliable: bool,
    pub estimator: Estimator,
    pub corrections: Vec<Correction>,
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub mode: FitMode,
    /// Distance window; `None` gives `[5h, 0.2·D]`.
    pub window: Option<(f64, f64)>,
    pub corrections: Vec<Correction>,
}

impl FitOptions {
    pub fn power() -> Self {
        FitOptions { mode: FitMode::Power, window: None, corrections: Vec::new() }
    }

    pub fn log_corrected() -> Self {
        FitOptions { mode: FitMode::LogCorrected, window: None, corrections: Vec::new() }
    }

    pub fn for_prediction(p: &BoundaryPrediction) -> Self {
        FitOptions { mode: p.mode, window: None, corrections: p.corrections.clone() }
    }

    /// Power fit with the `δ^{min(1, 2−2s)}` correction of smooth data.
    pub fn power_with_smooth_correction(s: f64) -> Self {
        FitOptions { mode: FitMode::Power, window: None, corrections: vec![Correction::Power((2.0 - 2.0 * s).min(1.0))] }
    }
}

struct Lsq {
    coef: Vec<f64>,
    stderr: Vec<f64>,
    r_squared: f64,
}

/// Least squares `y ≈ X c`; standard errors from `σ² (XᵀX)^{-1}`.
fn least_squares(x: &DMatrix<f64>, y: &[f64]) -> Result<Lsq> {
    let n = x.nrows();
    let p = x.ncols();
    let yv = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-13 * smax {
        return Err(Error::Parameter("fit design matrix is rank deficient".into()));
    }
    let c = svd.solve(&yv, 0.0).map_err(|e| Error::Parameter(e.to_string()))?;
    let resid = &yv - x * &c;
    let rss = resid.norm_squared();
    let mean = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let dof = n.saturating_sub(p);
    let sigma2 = if dof > 0 { rss / dof as f64 } else { 0.0 };
    let v_t = svd.v_t.as_ref().expect("requested");
    let stderr = (0..p)
        .map(|j| {
            let var: f64 = (0..p).map(|k| (v_t[(k, j)] / svd.singular_values[k]).powi(2)).sum();
            (sigma2 * var).sqrt()
        })
        .collect();
    Ok(Lsq { coef: c.iter().copied().collect(), stderr, r_squared })
}

/// Fit on explicit `(δ, u)` samples; the whole sample is used.
pub fn fit_profile(delta: &[f64], u: &[f64], diameter: f64, mode: FitMode, corrections: &[Correction]) -> Result<ExponentFit> {
    check_len(delta.len(), u.len())?;
    let n = delta.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints { need: MIN_FIT_POINTS, have: n });
    }
    if u.iter().any(|v| !(*v > 0.0)) || delta.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Parameter("fit needs positive values and distances".into()));
    }
    let p = 2 + corrections.len();
    let mut x = DMatrix::zeros(n, p);
    let mut y = vec![0.0; n];
    for k in 0..n {
        let d = delta[k];
        x[(k, 0)] = 1.0;
        match mode {
            FitMode::Power => {
                x[(k, 1)] = d.ln();
                y[k] = u[k].ln();
            }
            FitMode::LogCorrected => {
                x[(k, 1)] = (diameter / d).ln().ln();
                y[k] = (u[k] / d).ln();
            }
        }
        for (j, c) in corrections.iter().enumerate() {
            x[(k, 2 + j)] = c.eval(d, diameter);
        }
    }
    let fit = least_squares(&x, &y)?;
    let lo = delta.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = delta.iter().cloned().fold(0.0, f64::max);
    Ok(ExponentFit {
        exponent: fit.coef[1],
        stderr: fit.stderr[1],
        window: (lo, hi),
        r_squared: fit.r_squared,
        mode,
        points: n,
        reliable: fit.r_squared >= RELIABLE_R2,
        estimator: Estimator::SingleSolution,
        corrections: corrections.to_vec(),
    })
}

/// Power-mode fit over the default window, no corrections.
pub fn fit_boundary_exponent(u: &[f64], grid: &Grid, mode: FitMode) -> Result<ExponentFit> {
    fit_boundary_exponent_with(u, grid, &FitOptions { mode, window: None, corrections: Vec::new() })
}

pub fn default_window(grid: &Grid) -> (f64, f64) {
    (5.0 * grid.spacing(), 0.2 * grid.diameter())
}

pub fn fit_boundary_exponent_with(u: &[f64], grid: &Grid, opts: &FitOptions) -> Result<ExponentFit> {
    check_len(grid.len(), u.len())?;
    let (lo, hi) = opts.window.unwrap_or_else(|| default_window(grid));
    let h = grid.spacing();
    if lo < 3.0 * h * (1.0 - 1e-12) || hi > grid.diameter() / 4.0 * (1.0 + 1e-12) || lo >= hi {
        return Err(Error::Parameter(format!(
            "fit window [{lo}, {hi}] must satisfy 3h ≤ lo < hi ≤ D/4 (h = {h}, D = {})",
            grid.diameter()
        )));
    }
    let tol = 1e-9 * h;
    let mut ds = Vec::new();
    let mut us = Vec::new();
    for node in grid.midline_ray() {
        let d = grid.delta()[node];
        if d >= lo - tol && d <= hi + tol {
            ds.push(d);
            us.push(u[node]);
        }
    }
    fit_profile(&ds, &us, grid.diameter(), opts.mode, &opts.corrections)
}

#[derive(Clone, Debug)]
pub struct RefinementOptions {
    pub mode: FitMode,
    pub corrections: Vec<Correction>,
    /// Largest coarse-grid distance used.
    pub delta_max: f64,
}

impl RefinementOptions {
    pub fn for_prediction(p: &BoundaryPrediction) -> Self {
        RefinementOptions { mode: p.mode, corrections: p.corrections.clone(), delta_max: 0.15 }
    }
}

fn check_pair(coarse: &Grid, fine: &Grid) -> Result<()> {
    let c = coarse.spec();
    let f = fine.spec();
    if c.dim != f.dim || c.shape != f.shape || f.resolution != 2 * c.resolution + 1 {
        return Err(Error::Parameter(format!(
            "grids must be nested with m_fine = 2 m_coarse + 1 (got {} and {})",
            c.resolution, f.resolution
        )));
    }
    Ok(())
}

/// `log₂(u_c(k h_c) / u_f(k h_f))` for the first `count` ray nodes.
pub fn secant_trace(coarse: &Grid, uc: &[f64], fine: &Grid, uf: &[f64], count: usize) -> Result<Vec<f64>> {
    check_pair(coarse, fine)?;
    check_len(coarse.len(), uc.len())?;
    check_len(fine.len(), uf.len())?;
    let rc = coarse.midline_ray();
    let rf = fine.midline_ray();
    Ok(rc.iter().zip(&rf).take(count).map(|(&a, &b)| (uc[a] / uf[b]).log2()).collect())
}

/// Boundary exponent from a nested grid pair.
pub fn refinement_exponent(
    coarse: &Grid,
    uc: &[f64],
    fine: &Grid,
    uf: &[f64],
    opts: &RefinementOptions,
) -> Result<ExponentFit> {
    check_pair(coarse, fine)?;
    check_len(coarse.len(), uc.len())?;
    check_len(fine.len(), uf.len())?;
    let diameter = coarse.diameter();
    let rc = coarse.midline_ray();
    let rf = fine.midline_ray();
    let mut ds = Vec::new();
    let mut es = Vec::new();
    for (&a, &b) in rc.iter().zip(&rf) {
        let dc = coarse.delta()[a];
        if dc > opts.delta_max + 1e-12 {
            break;
        }
        let df = fine.delta()[b];
        if !(uc[a] > 0.0 && uf[b] > 0.0) {
            return Err(Error::Parameter("refinement fit needs positive values on the ray".into()));
        }
        let e = match opts.mode {
            FitMode::Power => (uc[a] / uf[b]).log2(),
            FitMode::LogCorrected => {
                let lc = (diameter / dc).ln();
                let lf = (diameter / df).ln();
                ((uc[a] / uf[b]).ln() - (dc / df).ln()) / (lc / lf).ln()
            }
        };
        ds.push(dc);
        es.push(e);
    }
    let n = ds.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints { need: MIN_FIT_POINTS, have: n });
    }
    let p = 1 + opts.corrections.len();
    let mut x = DMatrix::zeros(n, p);
    for k in 0..n {
        x[(k, 0)] = 1.0;
        for (j, c) in opts.corrections.iter().enumerate() {
            x[(k, 1 + j)] = c.eval(ds[k], diameter);
        }
    }
    let fit = least_squares(&x, &es)?;
    Ok(ExponentFit {
        exponent: fit.coef[0],
        stderr: fit.stderr[0],
        window: (ds[0], ds[n - 1]),
        r_squared: fit.r_squared,
        mode: opts.mode,
        points: n,
        reliable: fit.stderr[0] <= 0.05,
        estimator: Estimator::Refinement,
        corrections: opts.corrections.clone(),
    })
}
