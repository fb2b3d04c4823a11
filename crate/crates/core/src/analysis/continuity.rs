use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;

use super::formulas::exponent_table;
use super::norms::{h1_power_norm, lebesgue_norm};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ContinuityGap {
    /// `‖∇(|u−v|^{(𝔖+1)/2})‖²`
    pub lhs: f64,
    /// `‖f−g‖_r^{r(N−2)/(N−2r)}`
    pub rhs_base: f64,
}

impl ContinuityGap {
    /// `lhs / rhs_base`, the constant this instance requires.
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs_base
    }
}

/// Both sides of the continuity-in-datum estimate for solutions `u, v` of data `f, g`.
#[allow(clippy::too_many_arguments)]
pub fn continuity_gap(
    u: &[f64],
    v: &[f64],
    f: &[f64],
    g: &[f64],
    r: f64,
    big_s: f64,
    gamma: f64,
    grid: &Grid,
) -> Result<ContinuityGap> {
    for x in [u, v, f, g] {
        check_len(grid.len(), x.len())?;
    }
    let n = grid.dim() as f64;
    if !(r >= 1.0 && r < n / 2.0) {
        return Err(Error::Regime(format!("continuity estimate needs 1 ≤ r < N/2, got r = {r}")));
    }
    let table = exponent_table(grid.dim(), Some(r), gamma, None)?;
    let s_r = table.s_r.expect("defined for r < N/2");
    if !(big_s >= gamma - 1e-12 && big_s <= s_r + 1e-12) {
        return Err(Error::Regime(format!("𝔖 = {big_s} outside [γ, 𝔖_r] = [{gamma}, {s_r}]")));
    }
    let diff: Vec<f64> = u.iter().zip(v).map(|(a, b)| (a - b).abs()).collect();
    let lhs = h1_power_norm(&diff, (big_s + 1.0) / 2.0, grid)?;
    let fg: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
    let rhs_base = lebesgue_norm(&fg, r, grid)?.powf(r * (n - 2.0) / (n - 2.0 * r));
    Ok(ContinuityGap { lhs, rhs_base })
}
