//! Regularity threshold scans over a refinement ladder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::singular::{continuation_solve, Flag, SingularProblem, WeightSpec};

use super::fit::{refinement_exponent, Correction, ExponentFit, FitMode, RefinementOptions};
use super::formulas::boundary_prediction;
use super::norms::h1_power_norm;

pub const DIVERGENCE_FACTOR: f64 = 1.2;
pub const STABILITY_BAND: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ScanClass {
    Divergent,
    Bounded,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanEntry {
    pub l: f64,
    pub alpha: f64,
    /// `h1_power_norm(u, α)` of the solved iterate on each ladder level.
    pub direct_norms: Vec<f64>,
    pub direct_growth: Vec<f64>,
    /// Growth/stability rule applied to `direct_norms`.
    pub direct_class: ScanClass,
    /// `h1_power_norm(δ^κ̂, α)` on each ladder level.
    pub synthetic_norms: Vec<f64>,
    /// Ratio of the last two increments of `synthetic_norms`.
    pub increment_ratio: f64,
    pub class: ScanClass,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanReport {
    pub ladder: Vec<usize>,
    pub kappa_fit: ExponentFit,
    /// Power exponent used for the Hardy-side profile.
    pub kappa: f64,
    pub entries: Vec<ScanEntry>,
}

/// Growth/stability rule on a sequence of norms.
pub fn growth_class(norms: &[f64]) -> ScanClass {
    let growth: Vec<f64> = norms.windows(2).map(|w| w[1] / w[0]).collect();
    if growth.iter().all(|g| *g >= DIVERGENCE_FACTOR) {
        ScanClass::Divergent
    } else if growth.iter().all(|g| (g - 1.0).abs() < STABILITY_BAND) {
        ScanClass::Bounded
    } else {
        ScanClass::Inconclusive
    }
}

/// Increment-ratio rule: a norm sequence on halving grids whose increments do
/// not shrink diverges; shrinking increments converge.
pub fn increment_class(norms: &[f64]) -> (f64, ScanClass) {
    let k = norms.len();
    if k < 3 {
        return (f64::NAN, ScanClass::Inconclusive);
    }
    let d1 = norms[k - 2] - norms[k - 3];
    let d2 = norms[k - 1] - norms[k - 2];
    if d1 <= 0.0 {
        return (f64::NAN, if d2 <= d1.abs() { ScanClass::Bounded } else { ScanClass::Inconclusive });
    }
    let ratio = d2 / d1;
    (ratio, if ratio >= 1.0 { ScanClass::Divergent } else { ScanClass::Bounded })
}

fn refinement_options(problem: &SingularProblem) -> RefinementOptions {
    let s = problem.s();
    let zeta = match &problem.weight {
        WeightSpec::SingularPower { zeta } => Some(*zeta),
        WeightSpec::Lebesgue { values, r } if r.is_infinite() && values.iter().all(|v| *v == values[0]) => Some(0.0),
        _ => None,
    };
    match zeta.and_then(|z| boundary_prediction(problem.gamma, z, s).ok()) {
        Some(p) => RefinementOptions::for_prediction(&p),
        None => RefinementOptions {
            mode: FitMode::Power,
            corrections: vec![Correction::Power((2.0 - 2.0 * s).min(1.0))],
            delta_max: 0.15,
        },
    }
}

/// Classification from solutions already computed on a nested ladder.
pub fn classify_ladder(levels: &[(&Grid, &[f64])], ls: &[f64], opts: &RefinementOptions) -> Result<ScanReport> {
    if levels.len() < 3 {
        return Err(Error::Parameter(format!("threshold scan needs ≥ 3 ladder levels, got {}", levels.len())));
    }
    let (gc, uc) = levels[levels.len() - 2];
    let (gf, uf) = levels[levels.len() - 1];
    let kappa_fit = refinement_exponent(gc, uc, gf, uf, opts)?;
    let kappa = match opts.mode {
        FitMode::Power => kappa_fit.exponent,
        FitMode::LogCorrected => 1.0,
    };
    let mut entries = Vec::new();
    for &l in ls {
        if !(l > -1.0) {
            return Err(Error::Parameter(format!("𝔏 = {l} must exceed −1")));
        }
        let alpha = (l + 1.0) / 2.0;
        let direct_norms = levels.iter().map(|(g, u)| h1_power_norm(u, alpha, g)).collect::<Result<Vec<_>>>()?;
        let synthetic_norms = levels
            .iter()
            .map(|(g, _)| {
                let v: Vec<f64> = g.delta().iter().map(|d| d.powf(kappa)).collect();
                h1_power_norm(&v, alpha, g)
            })
            .collect::<Result<Vec<_>>>()?;
        let (increment_ratio, class) = increment_class(&synthetic_norms);
        entries.push(ScanEntry {
            l,
            alpha,
            direct_growth: direct_norms.windows(2).map(|w| w[1] / w[0]).collect(),
            direct_class: growth_class(&direct_norms),
            direct_norms,
            synthetic_norms,
            increment_ratio,
            class,
        });
    }
    Ok(ScanReport { ladder: levels.iter().map(|(g, _)| g.resolution()).collect(), kappa_fit, kappa, entries })
}

/// Solves the problem on each ladder resolution and classifies each 𝔏.
pub fn sobolev_threshold_scan(problem: &SingularProblem, ls: &[f64], ladder: &[usize]) -> Result<ScanReport> {
    let base = problem.grid().spec();
    let mut sols = Vec::new();
    for &m in ladder {
        let p = problem.on_grid(crate::grid::GridSpec { resolution: m, ..base })?;
        let report = continuation_solve(&p)?;
        if report.flag != Flag::Converged {
            return Err(Error::Solver(format!("continuation at m = {m} did not converge")));
        }
        sols.push((p.grid().clone(), report.solution));
    }
    let levels: Vec<(&Grid, &[f64])> = sols.iter().map(|(g, u)| (g, u.as_slice())).collect();
    classify_ladder(&levels, ls, &refinement_options(problem))
}
