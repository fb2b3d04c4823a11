//! Green function checks: kernel two-sided bounds and distance-weight actions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linsolve::{LinearSolver, SolveOptions};
use crate::operator::MixedOperator;

/// Largest resolution accepted by [`green_distance_action`].
pub const ACTION_MAX_RESOLUTION: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum ActionKind {
    /// Datum `δ^{−β}`, `0 ≤ β < 2`.
    Power(f64),
    /// Datum `δ^{−1} ln^{−Ξ}(D/δ)`, `0 ≤ Ξ < 1`.
    Log(f64),
}

impl ActionKind {
    fn validate(&self) -> Result<()> {
        match *self {
            ActionKind::Power(b) if !(0.0..2.0).contains(&b) => {
                Err(Error::Regime(format!("β = {b}: δ^-β must be integrable against δ (need 0 ≤ β < 2)")))
            }
            ActionKind::Log(x) if !(0.0..1.0).contains(&x) => Err(Error::Regime(format!("Ξ = {x} outside [0,1)"))),
            _ => Ok(()),
        }
    }

    pub fn datum(&self, delta: f64, diameter: f64) -> f64 {
        match *self {
            ActionKind::Power(b) => delta.powf(-b),
            ActionKind::Log(x) => 1.0 / (delta * (diameter / delta).ln().powf(x)),
        }
    }

    /// Predicted boundary profile of `A^{-1}` applied to the datum.
    pub fn profile(&self, delta: f64, diameter: f64) -> f64 {
        let l = (diameter / delta).ln();
        match *self {
            ActionKind::Power(b) if b < 1.0 => delta,
            ActionKind::Power(1.0) => delta * l,
            ActionKind::Power(b) => delta.powf(2.0 - b),
            ActionKind::Log(x) => delta * l.powf(1.0 - x),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioStats {
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    pub count: usize,
}

impl RatioStats {
    fn from_iter<I: IntoIterator<Item = f64>>(it: I) -> Result<Self> {
        let mut min = f64::INFINITY;
        let mut max = 0.0f64;
        let mut count = 0;
        for r in it {
            min = min.min(r);
            max = max.max(r);
            count += 1;
        }
        if count == 0 || !(min > 0.0) {
            return Err(Error::Solver("ratio statistics need positive samples".into()));
        }
        Ok(RatioStats { min, max, spread: max / min, count })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ActionStats {
    pub kind: ActionKind,
    pub ratios: RatioStats,
    pub iterations: usize,
}

/// Solves `A v = datum` and compares `v` with the predicted profile on nodes with `δ ≥ 3h`.
pub fn green_distance_action(op: &MixedOperator, kind: ActionKind) -> Result<ActionStats> {
    kind.validate()?;
    let grid = op.grid();
    if grid.dim() != 3 {
        return Err(Error::Parameter("distance actions are checked in N = 3".into()));
    }
    if grid.resolution() > ACTION_MAX_RESOLUTION {
        return Err(Error::Parameter(format!("resolution above {ACTION_MAX_RESOLUTION}")));
    }
    let d = grid.diameter();
    let rhs: Vec<f64> = grid.delta().iter().map(|&x| kind.datum(x, d)).collect();
    let solver = LinearSolver::new(op, None, SolveOptions::with_tol(1e-10))?;
    let res = solver.solve(&rhs, None)?;
    let cut = 3.0 * grid.spacing() * (1.0 - 1e-12);
    let ratios = RatioStats::from_iter(
        grid.delta()
            .iter()
            .zip(&res.solution)
            .filter(|(x, _)| **x >= cut)
            .map(|(&x, v)| v / kind.profile(x, d)),
    )?;
    Ok(ActionStats { kind, ratios, iterations: res.iterations })
}

/// `|x−y|^{2−N} · min(δ(x)δ(y)/|x−y|², 1)`
pub fn kernel_estimate(grid: &Grid, x: usize, y: usize) -> f64 {
    let a = grid.coords()[x];
    let b = grid.coords()[y];
    let r2: f64 = (0..grid.dim()).map(|k| (a[k] - b[k]).powi(2)).sum();
    let r = r2.sqrt();
    let n = grid.dim() as f64;
    let dd = grid.delta()[x] * grid.delta()[y];
    r.powf(2.0 - n) * (dd / r2).min(1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelStats {
    pub sources: Vec<usize>,
    pub ratios: RatioStats,
    /// `max |G(a,b) − G(b,a)| / max G` over source pairs.
    pub symmetry_error: f64,
    pub max_g: f64,
}

/// Green columns at `sources`; ratio of `G` to the kernel estimate over pairs
/// `x ≠ y` with `δ(x), δ(y) ≥ factor·h`.
pub fn green_kernel_ratios(op: &MixedOperator, sources: &[usize], factor: f64) -> Result<(KernelStats, Vec<Vec<f64>>)> {
    let grid = op.grid();
    let solver = LinearSolver::new(op, None, SolveOptions::with_tol(1e-13))?;
    let cols = sources.iter().map(|&y| solver.green_column(y)).collect::<Result<Vec<_>>>()?;
    let cut = factor * grid.spacing() * (1.0 - 1e-12);
    let mut samples = Vec::new();
    let mut max_g = 0.0f64;
    for (k, &y) in sources.iter().enumerate() {
        if grid.delta()[y] < cut {
            return Err(Error::Parameter(format!("source {y} lies within {factor}h of the boundary")));
        }
        for (x, g) in cols[k].iter().enumerate() {
            max_g = max_g.max(*g);
            if x != y && grid.delta()[x] >= cut {
                samples.push(g / kernel_estimate(grid, x, y));
            }
        }
    }
    let mut sym = 0.0f64;
    for a in 0..sources.len() {
        for b in a + 1..sources.len() {
            sym = sym.max((cols[a][sources[b]] - cols[b][sources[a]]).abs());
        }
    }
    let stats = KernelStats {
        sources: sources.to_vec(),
        ratios: RatioStats::from_iter(samples)?,
        symmetry_error: sym / max_g,
        max_g,
    };
    Ok((stats, cols))
}

/// Deterministic interior sources near fixed points of the unit ball/box.
pub fn default_sources(grid: &Grid) -> Vec<usize> {
    let targets: [[f64; 3]; 5] = match grid.shape() {
        crate::grid::Shape::Ball => [
            [0.0, 0.0, 0.0],
            [0.4, 0.0, 0.0],
            [0.0, -0.6, 0.0],
            [0.0, 0.0, 0.75],
            [0.3, 0.3, -0.3],
        ],
        crate::grid::Shape::Box => [
            [0.5, 0.5, 0.5],
            [0.3, 0.5, 0.5],
            [0.5, 0.2, 0.5],
            [0.5, 0.5, 0.8],
            [0.35, 0.65, 0.35],
        ],
    };
    let dim = grid.dim();
    let mut out: Vec<usize> = Vec::new();
    for t in targets {
        let best = (0..grid.len())
            .min_by(|&a, &b| {
                let da: f64 = (0..dim).map(|k| (grid.coords()[a][k] - t[k]).powi(2)).sum();
                let db: f64 = (0..dim).map(|k| (grid.coords()[b][k] - t[k]).powi(2)).sum();
                da.total_cmp(&db)
            })
            .expect("grid is nonempty");
        if !out.contains(&best) {
            out.push(best);
        }
    }
    out
}
