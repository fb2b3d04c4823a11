//! Closed-form exponents for the existence, regularity and boundary theory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::fit::{Correction, FitMode};

/// Tolerance used when classifying `ζ + γ` against 1.
pub const REGIME_EPS: f64 = 1e-12;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Regimes {
    /// `"below"`, `"above"` or `"equal"` for `r` against `r♯`.
    pub r_vs_r_sharp: Option<String>,
    /// `"below"`, `"limit"` or `"above"` for `r` against `N/2`.
    pub r_vs_half_dim: Option<String>,
    /// `"weak"`, `"borderline"` or `"strong"` for `ζ + γ` against 1.
    pub singularity: Option<String>,
    pub nonexistence: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentTable {
    pub dim: usize,
    pub r: Option<f64>,
    pub gamma: f64,
    pub zeta: Option<f64>,
    /// `2* = 2N/(N−2)`; absent for `N = 2`.
    pub critical_exponent: Option<f64>,
    pub q: Option<f64>,
    pub r_sharp: Option<f64>,
    pub s_r: Option<f64>,
    pub sigma_r: Option<f64>,
    pub sobolev_lower: Option<f64>,
    /// `(γ+ζ−1)/(2−ζ)`.
    pub l_star: Option<f64>,
    /// Regularity threshold: `max(0, 𝔏*)`.
    pub regularity_threshold: Option<f64>,
    pub kappa: Option<f64>,
    pub beta: Option<f64>,
    pub regimes: Regimes,
}

fn cmp_label(a: f64, b: f64, labels: [&str; 3]) -> String {
    if (a - b).abs() <= REGIME_EPS * b.abs().max(1.0) {
        labels[1].to_string()
    } else if a < b {
        labels[0].to_string()
    } else {
        labels[2].to_string()
    }
}

/// `r♯ = (2*/(1−γ))′`, equal to 1 when the conjugated exponent is infinite.
pub fn r_sharp(dim: usize, gamma: f64) -> f64 {
    if dim <= 2 || gamma >= 1.0 {
        return 1.0;
    }
    let crit = 2.0 * dim as f64 / (dim as f64 - 2.0);
    let p = crit / (1.0 - gamma);
    p / (p - 1.0)
}

pub fn exponent_table(dim: usize, r: Option<f64>, gamma: f64, zeta: Option<f64>) -> Result<ExponentTable> {
    if !(2..=3).contains(&dim) {
        return Err(Error::Parameter(format!("dimension {dim} outside 2..=3")));
    }
    if !(gamma >= 0.0) {
        return Err(Error::Parameter(format!("γ = {gamma} must be ≥ 0")));
    }
    let n = dim as f64;
    let mut t = ExponentTable {
        dim,
        r,
        gamma,
        zeta,
        critical_exponent: (dim > 2).then(|| 2.0 * n / (n - 2.0)),
        q: None,
        r_sharp: Some(r_sharp(dim, gamma)),
        s_r: None,
        sigma_r: None,
        sobolev_lower: None,
        l_star: None,
        regularity_threshold: None,
        kappa: None,
        beta: None,
        regimes: Regimes::default(),
    };
    if let Some(r) = r {
        if !(r >= 1.0) {
            return Err(Error::Parameter(format!("r = {r} below 1")));
        }
        if r == 1.0 && gamma == 0.0 {
            return Err(Error::Regime("(r,γ)=(1,0) excluded".into()));
        }
        let qd = n - r * (1.0 - gamma);
        if r.is_finite() && qd > 0.0 {
            t.q = Some(n * r * (1.0 + gamma) / qd);
        }
        let d2 = n - 2.0 * r;
        if r.is_finite() && d2 > 0.0 {
            t.s_r = Some((n * (r - 1.0) + gamma * r * (n - 2.0)) / d2);
            t.sigma_r = Some(n * r * (1.0 + gamma) / d2);
        }
        t.sobolev_lower = Some(gamma - 1.0 + 1.0 / r);
        t.regimes.r_vs_r_sharp = Some(cmp_label(r, r_sharp(dim, gamma), ["below", "equal", "above"]));
        t.regimes.r_vs_half_dim = Some(cmp_label(r, n / 2.0, ["below", "limit", "above"]));
    }
    if let Some(z) = zeta {
        if !(z >= 0.0) {
            return Err(Error::Parameter(format!("ζ = {z} must be ≥ 0")));
        }
        t.regimes.nonexistence = z >= 2.0;
        t.regimes.singularity = Some(cmp_label(z + gamma, 1.0, ["weak", "borderline", "strong"]));
        if z < 2.0 {
            let ls = (gamma + z - 1.0) / (2.0 - z);
            t.l_star = Some(ls);
            t.regularity_threshold = Some(if z + gamma <= 1.0 + REGIME_EPS { 0.0 } else { ls });
        }
        t.kappa = Some((2.0 - z) / (gamma + 1.0));
        t.beta = Some((2.0 * gamma + z) / (gamma + 1.0));
    }
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryRegime {
    Weak,
    Borderline,
    Strong,
}

/// Predicted boundary behaviour and the correction terms used to fit it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryPrediction {
    pub regime: BoundaryRegime,
    pub mode: FitMode,
    /// Power exponent, or the log exponent `1/(2−ζ)` in the borderline case.
    pub exponent: f64,
    pub corrections: Vec<Correction>,
}

/// Exponent `p − κ` of the leading correction in the strong regime,
/// `p = (1 + √(1 + 4γκ(1−κ)))/2`.
pub fn strong_correction_exponent(gamma: f64, kappa: f64) -> f64 {
    let p = 0.5 * (1.0 + (1.0 + 4.0 * gamma * kappa * (1.0 - kappa)).sqrt());
    p - kappa
}

fn push_power(out: &mut Vec<Correction>, theta: f64) {
    if theta < 0.1 {
        return;
    }
    let clash = out.iter().any(|c| matches!(c, Correction::Power(t) if (t - theta).abs() < 0.05));
    if !clash {
        out.push(Correction::Power(theta));
    }
}

/// Boundary prediction for `f = δ^{−ζ}`, `0 ≤ ζ < 2`.
pub fn boundary_prediction(gamma: f64, zeta: f64, s: f64) -> Result<BoundaryPrediction> {
    if !(0.0..2.0).contains(&zeta) {
        return Err(Error::Regime(format!("ζ = {zeta} outside [0, 2)")));
    }
    let smooth = (2.0 - 2.0 * s).min(1.0);
    let sum = zeta + gamma;
    let mut corrections = Vec::new();
    if (sum - 1.0).abs() <= REGIME_EPS {
        corrections.push(Correction::InverseLog);
        return Ok(BoundaryPrediction {
            regime: BoundaryRegime::Borderline,
            mode: FitMode::LogCorrected,
            exponent: 1.0 / (2.0 - zeta),
            corrections,
        });
    }
    if sum < 1.0 {
        push_power(&mut corrections, 1.0 - sum);
        push_power(&mut corrections, smooth);
        corrections.sort_by(|a, b| a.order().total_cmp(&b.order()));
        return Ok(BoundaryPrediction { regime: BoundaryRegime::Weak, mode: FitMode::Power, exponent: 1.0, corrections });
    }
    let kappa = (2.0 - zeta) / (gamma + 1.0);
    push_power(&mut corrections, strong_correction_exponent(gamma, kappa));
    push_power(&mut corrections, smooth);
    corrections.sort_by(|a, b| a.order().total_cmp(&b.order()));
    Ok(BoundaryPrediction { regime: BoundaryRegime::Strong, mode: FitMode::Power, exponent: kappa, corrections })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_examples() {
        let t = exponent_table(3, Some(1.0), 0.5, None).unwrap();
        assert!((t.q.unwrap() - 1.8).abs() < 1e-12);
        assert!((t.s_r.unwrap() - 0.5).abs() < 1e-12);
        assert!((t.sigma_r.unwrap() - 4.5).abs() < 1e-12);
        assert!((t.r_sharp.unwrap() - 12.0 / 11.0).abs() < 1e-12);
        let t = exponent_table(3, None, 1.0, Some(0.5)).unwrap();
        assert!((t.l_star.unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((t.kappa.unwrap() - 0.75).abs() < 1e-12);
        assert!(matches!(exponent_table(3, Some(1.0), 0.0, None), Err(Error::Regime(_))));
    }

    #[test]
    fn regime_flags() {
        let t = exponent_table(3, Some(1.5), 0.5, Some(2.0)).unwrap();
        assert_eq!(t.regimes.r_vs_half_dim.as_deref(), Some("limit"));
        assert!(t.regimes.nonexistence);
        assert!(t.l_star.is_none());
    }

    #[test]
    fn predictions() {
        let p = boundary_prediction(1.0, 1.5, 0.5).unwrap();
        assert_eq!(p.regime, BoundaryRegime::Strong);
        assert!((p.exponent - 0.25).abs() < 1e-15);
        let p = boundary_prediction(0.5, 0.5, 0.5).unwrap();
        assert_eq!(p.mode, FitMode::LogCorrected);
        assert!((p.exponent - 2.0 / 3.0).abs() < 1e-15);
        let p = boundary_prediction(0.25, 0.25, 0.5).unwrap();
        assert_eq!(p.exponent, 1.0);
        assert_eq!(p.corrections.len(), 2);
    }
}
