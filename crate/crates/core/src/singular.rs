//! Regularized problems `A u = f_n/(u + 1/n)^γ` and monotone continuation in `n`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::fit::{fit_boundary_exponent_with, secant_trace, ExponentFit, FitOptions};
use crate::analysis::formulas::{boundary_prediction, BoundaryPrediction};
use crate::analysis::norms::h1_power_norm;
use crate::error::{check_len, Error, Result};
use crate::grid::{build_grid, Grid, GridSpec};
use crate::linsolve::{LinearSolver, SolveOptions};
use crate::operator::{dirichlet_energy, MixedOperator};
use crate::vecops::{max, max_abs, min, norm2};

pub const SCHEMA_VERSION: u32 = 1;

/// Datum `f`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum WeightSpec {
    /// Grid function with summability exponent `r ∈ [1, ∞]`.
    Lebesgue { values: Vec<f64>, r: f64 },
    /// `f = δ^{−ζ}`.
    SingularPower { zeta: f64 },
}

impl WeightSpec {
    pub fn constant(grid: &Grid, v: f64) -> Self {
        WeightSpec::Lebesgue { values: vec![v; grid.len()], r: f64::INFINITY }
    }

    /// `δ^{−ζ}` treated as a Lebesgue datum (truncated by `min(f, n)`).
    pub fn lebesgue_delta_power(grid: &Grid, zeta: f64, r: f64) -> Self {
        WeightSpec::Lebesgue { values: grid.delta().iter().map(|d| d.powf(-zeta)).collect(), r }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        match self {
            WeightSpec::Lebesgue { values, r } => {
                check_len(grid.len(), values.len())?;
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::Parameter("weight values must be finite and nonnegative".into()));
                }
                if !(*r >= 1.0) {
                    return Err(Error::Parameter(format!("summability exponent r = {r} below 1")));
                }
            }
            WeightSpec::SingularPower { zeta } => {
                if !(*zeta >= 0.0 && zeta.is_finite()) {
                    return Err(Error::Parameter(format!("singular exponent ζ = {zeta} must be ≥ 0")));
                }
            }
        }
        Ok(())
    }

    /// `f` sampled on the grid.
    pub fn values(&self, grid: &Grid) -> Vec<f64> {
        match self {
            WeightSpec::Lebesgue { values, .. } => values.clone(),
            WeightSpec::SingularPower { zeta } => grid.delta().iter().map(|d| d.powf(-zeta)).collect(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            WeightSpec::Lebesgue { r, .. } => format!("lebesgue(r={r})"),
            WeightSpec::SingularPower { zeta } => format!("deltapow(zeta={zeta})"),
        }
    }

    pub fn zeta(&self) -> Option<f64> {
        match self {
            WeightSpec::SingularPower { zeta } => Some(*zeta),
            _ => None,
        }
    }
}

/// How `f_n` is built from `f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularization {
    /// `min(f, n)` for Lebesgue data, the shifted power for the singular class.
    Standard,
    /// `min(f, n)` for every class; used when `ζ ≥ 2`.
    Truncation,
}

/// `f_n` for the standard regularization.
pub fn regularize_weight(weight: &WeightSpec, grid: &Grid, n: u64, gamma: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Parameter("regularization index n must be ≥ 1".into()));
    }
    match weight {
        WeightSpec::Lebesgue { values, .. } => Ok(values.iter().map(|f| f.min(n as f64)).collect()),
        WeightSpec::SingularPower { zeta } => {
            let zeta = *zeta;
            if zeta == 0.0 {
                return Ok(vec![1.0; grid.len()]);
            }
            if gamma <= 0.0 {
                return Err(Error::Regime(format!("ζ = {zeta} > 0 requires γ > 0")));
            }
            if zeta >= 2.0 {
                return Err(Error::Regime(format!(
                    "ζ = {zeta} ≥ 2 has no shifted regularization; use truncation (nonexistence mode)"
                )));
            }
            let shift = (1.0 / n as f64).powf((gamma + 1.0) / (2.0 - zeta));
            Ok(grid.delta().iter().map(|d| (d + shift).powf(-zeta)).collect())
        }
    }
}

/// `min(f, n)` for any datum.
pub fn truncate_weight(weight: &WeightSpec, grid: &Grid, n: u64) -> Vec<f64> {
    weight.values(grid).into_iter().map(|f| f.min(n as f64)).collect()
}

#[derive(Clone, Debug)]
pub struct Tolerances {
    /// Relative nonlinear residual `‖F‖_∞ / ‖f_n‖_∞`.
    pub newton: f64,
    /// Relative sup-change between the last two stages.
    pub continuation: f64,
    pub monotonicity: f64,
    pub max_newton: usize,
    pub max_picard: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { newton: 1e-9, continuation: 1e-2, monotonicity: 1e-10, max_newton: 60, max_picard: 400 }
    }
}

pub fn default_schedule() -> Vec<u64> {
    (0..=10).map(|k| 1u64 << k).collect()
}

#[derive(Clone, Debug)]
pub struct SingularProblem {
    pub gamma: f64,
    pub op: Arc<MixedOperator>,
    pub weight: WeightSpec,
    pub tolerances: Tolerances,
    pub schedule: Vec<u64>,
    pub regularization: Regularization,
}

impl SingularProblem {
    pub fn new(grid: Arc<Grid>, s: f64, gamma: f64, weight: WeightSpec) -> Result<Self> {
        let op = Arc::new(MixedOperator::new(grid, s)?);
        Self::with_operator(op, gamma, weight)
    }

    pub fn with_operator(op: Arc<MixedOperator>, gamma: f64, weight: WeightSpec) -> Result<Self> {
        let p = SingularProblem {
            gamma,
            op,
            weight,
            tolerances: Tolerances::default(),
            schedule: default_schedule(),
            regularization: Regularization::Standard,
        };
        p.validate()?;
        Ok(p)
    }

    /// Problem for the nonexistence diagnostic: `f = δ^{−ζ}` with truncation `min(f, n)`.
    pub fn for_nonexistence(op: Arc<MixedOperator>, gamma: f64, zeta: f64) -> Result<Self> {
        let p = SingularProblem {
            gamma,
            op,
            weight: WeightSpec::SingularPower { zeta },
            tolerances: Tolerances::default(),
            schedule: default_schedule(),
            regularization: Regularization::Truncation,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn grid(&self) -> &Grid {
        self.op.grid()
    }

    pub fn s(&self) -> f64 {
        self.op.order()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Parameter(format!("γ = {} must be ≥ 0", self.gamma)));
        }
        self.weight.validate(self.grid())?;
        match &self.weight {
            WeightSpec::SingularPower { zeta } => {
                if *zeta > 0.0 && self.gamma <= 0.0 {
                    return Err(Error::Regime(format!("the singular class δ^-ζ (ζ = {zeta}) requires γ > 0")));
                }
                if *zeta >= 2.0 && self.regularization == Regularization::Standard {
                    return Err(Error::Regime(format!(
                        "ζ = {zeta} ≥ 2 is the nonexistence regime; only the nonexistence diagnostic accepts it"
                    )));
                }
            }
            WeightSpec::Lebesgue { r, .. } => {
                if *r == 1.0 && self.gamma == 0.0 {
                    return Err(Error::Regime("(r,γ)=(1,0) excluded".into()));
                }
            }
        }
        if self.schedule.is_empty() || self.schedule[0] == 0 {
            return Err(Error::Parameter("n-schedule must start at n ≥ 1".into()));
        }
        if self.schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter("n-schedule must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn regularized_weight(&self, n: u64) -> Result<Vec<f64>> {
        match self.regularization {
            Regularization::Standard => regularize_weight(&self.weight, self.grid(), n, self.gamma),
            Regularization::Truncation => Ok(truncate_weight(&self.weight, self.grid(), n)),
        }
    }

    /// Same data on another grid (singular weights only or constant data).
    pub fn on_grid(&self, spec: GridSpec) -> Result<Self> {
        let grid = Arc::new(build_grid(spec)?);
        let weight = match &self.weight {
            WeightSpec::SingularPower { zeta } => WeightSpec::SingularPower { zeta: *zeta },
            WeightSpec::Lebesgue { values, r } => {
                let v0 = values.first().copied().unwrap_or(0.0);
                if values.iter().any(|v| *v != v0) {
                    return Err(Error::Parameter("grid transfer needs a constant or δ-power datum".into()));
                }
                WeightSpec::Lebesgue { values: vec![v0; grid.len()], r: *r }
            }
        };
        let op = Arc::new(MixedOperator::new(grid, self.s())?);
        Ok(SingularProblem { op, weight, ..self.clone() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonlinearMethod {
    Linear,
    Newton,
    Picard,
}

#[derive(Clone, Debug)]
pub struct RegularizedSolve {
    pub n: u64,
    pub u: Vec<f64>,
    pub iterations: usize,
    pub linear_iterations: usize,
    pub residual: f64,
    pub min_u: f64,
    pub method: NonlinearMethod,
}

fn nonlinear_residual(op: &MixedOperator, f: &[f64], gamma: f64, eps: f64, u: &[f64], out: &mut [f64]) {
    op.apply_into(u, out);
    for ((o, fi), ui) in out.iter_mut().zip(f).zip(u) {
        *o -= fi * (ui + eps).powf(-gamma);
    }
}

/// Newton solve of the regularized problem at level `n`.
pub fn solve_regularized(problem: &SingularProblem, n: u64, u_init: &[f64]) -> Result<RegularizedSolve> {
    let op = problem.op.as_ref();
    check_len(op.len(), u_init.len())?;
    if u_init.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::Parameter("initial iterate must be nonnegative".into()));
    }
    let f = problem.regularized_weight(n)?;
    solve_with_weight(problem, n, &f, u_init)
}

fn solve_with_weight(problem: &SingularProblem, n: u64, f: &[f64], u_init: &[f64]) -> Result<RegularizedSolve> {
    let op = problem.op.as_ref();
    let tol = &problem.tolerances;
    let gamma = problem.gamma;
    let eps = 1.0 / n as f64;
    let fmax = max_abs(f).max(f64::MIN_POSITIVE);
    let target = tol.newton * fmax;
    let len = op.len();

    if gamma == 0.0 {
        let solver = LinearSolver::new(op, None, SolveOptions::with_tol(1e-12))?;
        let res = solver.solve(f, Some(u_init))?;
        let mut r = vec![0.0; len];
        nonlinear_residual(op, f, gamma, eps, &res.solution, &mut r);
        let u = res.solution;
        return Ok(RegularizedSolve {
            n,
            min_u: min(&u),
            residual: max_abs(&r) / fmax,
            u,
            iterations: 1,
            linear_iterations: res.iterations,
            method: NonlinearMethod::Linear,
        });
    }

    let mut u = u_init.to_vec();
    let mut r = vec![0.0; len];
    nonlinear_residual(op, f, gamma, eps, &u, &mut r);
    let mut lin_its = 0;
    for k in 0..tol.max_newton {
        let rinf = max_abs(&r);
        if rinf <= target {
            return Ok(RegularizedSolve {
                n,
                min_u: min(&u),
                residual: rinf / fmax,
                u,
                iterations: k,
                linear_iterations: lin_its,
                method: NonlinearMethod::Newton,
            });
        }
        let shift: Vec<f64> = f.iter().zip(&u).map(|(fi, ui)| gamma * fi * (ui + eps).powf(-gamma - 1.0)).collect();
        let solver = LinearSolver::new(op, Some(shift), SolveOptions::with_tol(1e-11))?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = solver.solve(&neg, None)?;
        lin_its += step.iterations;
        let du = step.solution;
        let r2 = norm2(&r);
        let mut t = 1.0;
        let mut accepted = false;
        let mut trial = vec![0.0; len];
        let mut rt = vec![0.0; len];
        while t >= 1e-8 {
            for ((x, ui), di) in trial.iter_mut().zip(&u).zip(&du) {
                *x = ui + t * di;
            }
            if trial.iter().all(|x| *x > 0.0) {
                nonlinear_residual(op, f, gamma, eps, &trial, &mut rt);
                if norm2(&rt) <= (1.0 - 1e-4 * t) * r2 || max_abs(&rt) <= target {
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut r, &mut rt);
    }

    // Picard fallback: u ← A^{-1}[f/(u + 1/n)^γ]
    let solver = LinearSolver::new(op, None, SolveOptions::with_tol(1e-12))?;
    let mut u = if u.iter().all(|x| *x > 0.0) { u } else { u_init.to_vec() };
    for k in 0..tol.max_picard {
        let rhs: Vec<f64> = f.iter().zip(&u).map(|(fi, ui)| fi * (ui + eps).powf(-gamma)).collect();
        let res = solver.solve(&rhs, Some(&u))?;
        lin_its += res.iterations;
        // averaged update keeps the map from oscillating
        let next: Vec<f64> = u.iter().zip(&res.solution).map(|(a, b)| 0.5 * (a + b)).collect();
        u = next;
        nonlinear_residual(op, f, gamma, eps, &u, &mut r);
        let rinf = max_abs(&r);
        if rinf <= target {
            return Ok(RegularizedSolve {
                n,
                min_u: min(&u),
                residual: rinf / fmax,
                u,
                iterations: k + 1,
                linear_iterations: lin_its,
                method: NonlinearMethod::Picard,
            });
        }
    }
    Err(Error::Solver(format!(
        "n = {n}: Newton stalled and Picard did not reach relative residual {:.1e} (last {:.3e})",
        tol.newton,
        max_abs(&r) / fmax
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Flag {
    Converged,
    Diverging,
    Nonexistent,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageSummary {
    pub n: u64,
    pub iterations: usize,
    pub linear_iterations: usize,
    pub method: NonlinearMethod,
    pub residual: f64,
    pub min_u: f64,
    pub sup_u: f64,
    pub hopf_margin: f64,
    pub sup_diff: Option<f64>,
    pub monotonicity_margin: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub dim: usize,
    pub shape: crate::grid::Shape,
    pub resolution: usize,
    pub spacing: f64,
    pub s: f64,
    pub gamma: f64,
    pub weight: String,
    pub regularization: Regularization,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitBlock {
    pub predicted: Option<BoundaryPrediction>,
    pub fit: Option<ExponentFit>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormTable {
    pub sup: f64,
    pub l2: f64,
    pub dirichlet_energy: f64,
    pub fractional_energy: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LadderLevel {
    pub resolution: usize,
    pub flag: Flag,
    pub final_n: u64,
    pub sup_u: f64,
    pub boundary_value: f64,
    /// `(𝔏, ‖∇(v^{(𝔏+1)/2})‖²)` with `v = u / sup u`.
    pub h1_norms: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LadderDiagnostics {
    pub levels: Vec<LadderLevel>,
    /// Per 𝔏: growth factors between consecutive levels.
    pub growth: Vec<(f64, Vec<f64>)>,
    /// Mean secant exponent of the first ray nodes per refinement.
    pub trace_exponents: Vec<f64>,
    pub growth_rule: bool,
    pub trace_rule: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionReport {
    pub schema_version: u32,
    pub problem: ProblemSummary,
    pub stages: Vec<StageSummary>,
    pub monotonicity_margin: Option<f64>,
    pub hopf_constant: f64,
    pub flag: Flag,
    pub exponent_fit: FitBlock,
    pub norms: NormTable,
    pub ladder: Option<LadderDiagnostics>,
    #[serde(skip)]
    pub solution: Vec<f64>,
}

impl SolutionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Hopf margins `min(u_n/δ)` per stage.
    pub fn hopf_history(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.hopf_margin).collect()
    }
}

fn problem_summary(p: &SingularProblem) -> ProblemSummary {
    let g = p.grid();
    ProblemSummary {
        dim: g.dim(),
        shape: g.shape(),
        resolution: g.resolution(),
        spacing: g.spacing(),
        s: p.s(),
        gamma: p.gamma,
        weight: p.weight.describe(),
        regularization: p.regularization,
    }
}

fn hopf_margin(grid: &Grid, u: &[f64]) -> f64 {
    u.iter().zip(grid.delta()).fold(f64::INFINITY, |m, (ui, d)| m.min(ui / d))
}

/// Sup-change flag: small last change and shrinking changes at the end.
fn continuation_flag(stages: &[StageSummary], tol: f64) -> Flag {
    let diffs: Vec<f64> = stages.iter().filter_map(|s| s.sup_diff).collect();
    let sup = stages.last().map_or(0.0, |s| s.sup_u);
    match diffs.as_slice() {
        [] => Flag::Diverging,
        [last] => {
            if *last <= tol * sup {
                Flag::Converged
            } else {
                Flag::Diverging
            }
        }
        [.., prev, last] => {
            if *last <= tol * sup && *last <= *prev * (1.0 + 1e-12) + 1e-14 {
                Flag::Converged
            } else {
                Flag::Diverging
            }
        }
    }
}

fn norm_table(op: &MixedOperator, u: &[f64]) -> Result<NormTable> {
    let g = op.grid();
    let vol = g.cell_volume();
    Ok(NormTable {
        sup: max(u),
        l2: (u.iter().map(|x| x * x).sum::<f64>() * vol).sqrt(),
        dirichlet_energy: dirichlet_energy(g, u)?,
        fractional_energy: op.fractional_energy(u)?,
        energy: op.energy(u)?,
    })
}

fn fit_block(problem: &SingularProblem, u: &[f64]) -> FitBlock {
    let prediction = match &problem.weight {
        WeightSpec::SingularPower { zeta } if problem.regularization == Regularization::Standard => {
            boundary_prediction(problem.gamma, *zeta, problem.s()).ok()
        }
        _ => None,
    };
    let opts = match &prediction {
        Some(p) => FitOptions::for_prediction(p),
        None => FitOptions::power_with_smooth_correction(problem.s()),
    };
    match fit_boundary_exponent_with(u, problem.grid(), &opts) {
        Ok(fit) => FitBlock { predicted: prediction, fit: Some(fit), error: None },
        Err(e) => FitBlock { predicted: prediction, fit: None, error: Some(e.to_string()) },
    }
}

/// Warm-started continuation over the problem's `n`-schedule.
pub fn continuation_solve(problem: &SingularProblem) -> Result<SolutionReport> {
    problem.validate()?;
    let op = problem.op.as_ref();
    let grid = problem.grid();
    let mut stages: Vec<StageSummary> = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut mono_margin: Option<f64> = None;

    let partial = |stages: &Vec<StageSummary>, u: &[f64], msg: String| -> Error {
        let report = SolutionReport {
            schema_version: SCHEMA_VERSION,
            problem: problem_summary(problem),
            stages: stages.clone(),
            monotonicity_margin: None,
            hopf_constant: if u.is_empty() { 0.0 } else { hopf_margin(grid, u) },
            flag: Flag::Diverging,
            exponent_fit: FitBlock { predicted: None, fit: None, error: None },
            norms: NormTable { sup: 0.0, l2: 0.0, dirichlet_energy: 0.0, fractional_energy: 0.0, energy: 0.0 },
            ladder: None,
            solution: u.to_vec(),
        };
        Error::Continuation { message: msg, partial: Box::new(report) }
    };

    for &n in &problem.schedule {
        let f = problem.regularized_weight(n)?;
        let init = match &prev {
            Some(u) => u.clone(),
            None => {
                let solver = LinearSolver::new(op, None, SolveOptions::with_tol(1e-12))?;
                solver.solve(&f, None)?.solution
            }
        };
        let sol = match solve_with_weight(problem, n, &f, &init) {
            Ok(s) => s,
            Err(e) => return Err(partial(&stages, prev.as_deref().unwrap_or(&[]), e.to_string())),
        };
        if !(sol.min_u > 0.0) {
            return Err(partial(&stages, &sol.u, format!("n = {n}: iterate lost positivity")));
        }
        let (sup_diff, margin) = match &prev {
            Some(p) => {
                let d: Vec<f64> = sol.u.iter().zip(p).map(|(a, b)| a - b).collect();
                (Some(max_abs(&d)), Some(min(&d)))
            }
            None => (None, None),
        };
        if let Some(mg) = margin {
            mono_margin = Some(mono_margin.map_or(mg, |m: f64| m.min(mg)));
        }
        stages.push(StageSummary {
            n,
            iterations: sol.iterations,
            linear_iterations: sol.linear_iterations,
            method: sol.method,
            residual: sol.residual,
            min_u: sol.min_u,
            sup_u: max(&sol.u),
            hopf_margin: hopf_margin(grid, &sol.u),
            sup_diff,
            monotonicity_margin: margin,
        });
        if let Some(mg) = margin {
            if mg < -problem.tolerances.monotonicity {
                return Err(partial(&stages, &sol.u, format!("n = {n}: monotonicity violated by {:.3e}", -mg)));
            }
        }
        prev = Some(sol.u);
    }
    let u = prev.expect("schedule is nonempty");
    let flag = continuation_flag(&stages, problem.tolerances.continuation);
    Ok(SolutionReport {
        schema_version: SCHEMA_VERSION,
        problem: problem_summary(problem),
        monotonicity_margin: mono_margin,
        hopf_constant: hopf_margin(grid, &u),
        flag,
        exponent_fit: fit_block(problem, &u),
        norms: norm_table(op, &u)?,
        stages,
        ladder: None,
        solution: u,
    })
}

/// 𝔏 values of the nonexistence growth rule.
pub const NONEXISTENCE_SCAN: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
pub const NONEXISTENCE_GROWTH: f64 = 1.2;
/// Nodes on the ray used for the boundary-trace secant.
pub const TRACE_NODES: usize = 4;

/// Schedule reaching `max f` on the grid for truncated data.
fn truncation_schedule(base: &[u64], fmax: f64) -> Vec<u64> {
    let mut out = base.to_vec();
    let mut n = *out.last().unwrap_or(&1);
    while (n as f64) < fmax {
        n *= 2;
        out.push(n);
    }
    out
}

/// Continuation on the ladder `m, 2m+1, 4m+3` and the nonexistence decision.
pub fn detect_nonexistence(problem: &SingularProblem) -> Result<SolutionReport> {
    let zeta = match problem.weight {
        WeightSpec::SingularPower { zeta } => zeta,
        _ => return Err(Error::Parameter("nonexistence diagnostic needs a δ^-ζ weight".into())),
    };
    if !(problem.gamma > 0.0) {
        return Err(Error::Regime("nonexistence diagnostic needs γ > 0".into()));
    }
    let base = problem.grid().spec();
    let specs = [base, base.refined(), base.refined().refined()];
    let mut levels = Vec::new();
    let mut solutions: Vec<(Grid, Vec<f64>)> = Vec::new();
    let mut last_report = None;
    for spec in specs {
        let mut p = problem.on_grid(spec)?;
        if zeta >= 2.0 {
            p.regularization = Regularization::Truncation;
            let fmax = max(&p.weight.values(p.grid()));
            p.schedule = truncation_schedule(&problem.schedule, fmax);
        }
        let report = continuation_solve(&p)?;
        let u = &report.solution;
        let sup = max(u);
        let v: Vec<f64> = u.iter().map(|x| x / sup).collect();
        let h1 = NONEXISTENCE_SCAN
            .iter()
            .map(|&l| Ok((l, h1_power_norm(&v, (l + 1.0) / 2.0, p.grid())?)))
            .collect::<Result<Vec<_>>>()?;
        let ray = p.grid().midline_ray();
        levels.push(LadderLevel {
            resolution: spec.resolution,
            flag: report.flag,
            final_n: report.stages.last().map_or(0, |s| s.n),
            sup_u: sup,
            boundary_value: u[ray[0]],
            h1_norms: h1,
        });
        solutions.push((p.grid().clone(), u.clone()));
        last_report = Some(report);
    }
    let growth: Vec<(f64, Vec<f64>)> = NONEXISTENCE_SCAN
        .iter()
        .enumerate()
        .map(|(k, &l)| (l, levels.windows(2).map(|w| w[1].h1_norms[k].1 / w[0].h1_norms[k].1).collect()))
        .collect();
    let growth_rule = growth.iter().all(|(_, g)| g.iter().all(|x| *x >= NONEXISTENCE_GROWTH));
    let trace_exponents = solutions
        .windows(2)
        .map(|w| {
            let e = secant_trace(&w[0].0, &w[0].1, &w[1].0, &w[1].1, TRACE_NODES)?;
            Ok(e.iter().sum::<f64>() / e.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let trace_rule = trace_exponents.iter().all(|e| *e <= 0.0);
    let mut report = last_report.expect("ladder has three levels");
    if growth_rule && trace_rule {
        report.flag = Flag::Nonexistent;
    }
    report.ladder = Some(LadderDiagnostics { levels, growth, trace_exponents, growth_rule, trace_rule });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(m: usize) -> Arc<Grid> {
        Arc::new(build_grid(GridSpec::unit_box(2, m)).unwrap())
    }

    #[test]
    fn regularization_examples() {
        let g = grid(7);
        let one = regularize_weight(&WeightSpec::SingularPower { zeta: 0.0 }, &g, 5, 1.0).unwrap();
        assert!(one.iter().all(|v| *v == 1.0));
        let f4 = regularize_weight(&WeightSpec::SingularPower { zeta: 1.0 }, &g, 4, 1.0).unwrap();
        for (v, d) in f4.iter().zip(g.delta()) {
            assert!((v - 1.0 / (d + 0.0625)).abs() < 1e-12);
        }
        let mut vals = vec![1.0; g.len()];
        vals[3] = 100.0;
        let capped = regularize_weight(&WeightSpec::Lebesgue { values: vals, r: 2.0 }, &g, 10, 1.0).unwrap();
        assert_eq!(capped[3], 10.0);
        assert_eq!(capped[0], 1.0);
        assert!(regularize_weight(&WeightSpec::SingularPower { zeta: 1.0 }, &g, 4, 0.0).is_err());
        assert!(regularize_weight(&WeightSpec::SingularPower { zeta: 2.5 }, &g, 4, 1.0).is_err());
    }

    #[test]
    fn excluded_pair() {
        let g = grid(7);
        let w = WeightSpec::Lebesgue { values: vec![1.0; g.len()], r: 1.0 };
        assert!(matches!(SingularProblem::new(g, 0.5, 0.0, w), Err(Error::Regime(_))));
    }

    #[test]
    fn linear_case_single_solve() {
        let g = grid(15);
        let p = SingularProblem::new(g.clone(), 0.5, 0.0, WeightSpec::constant(&g, 1.0)).unwrap();
        let u0 = vec![0.0; g.len()];
        let r = solve_regularized(&p, 1, &u0).unwrap();
        assert_eq!(r.method, NonlinearMethod::Linear);
        assert_eq!(r.iterations, 1);
        assert!(r.residual < 1e-9);
    }
}
