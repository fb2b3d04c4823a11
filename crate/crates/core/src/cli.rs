//! Command-line driver.
//!
//! Problem parameters come from flags or from a TOML file given with
//! `--config`; flags win. Weights use a small language:
//! `const:<v>`, `deltapow:<ζ>` (the singular class `δ^{−ζ}`),
//! `ldeltapow:<ζ>` (`δ^{−ζ}` as a Lebesgue datum with summability `--r`)
//! and `file:<path>`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    boundary_prediction, default_sources, exponent_table, green_kernel_ratios, refinement_exponent, ExponentTable,
    KernelStats, RefinementOptions,
};
use crate::analysis::fit::MIN_FIT_POINTS;
use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid, GridSpec, Shape};
use crate::linsolve::{principal_eigenpair, write_grid_function_csv};
use crate::operator::{write_dense_dump, MixedOperator};
use crate::singular::{
    continuation_solve, detect_nonexistence, Flag, SingularProblem, SolutionReport, WeightSpec, SCHEMA_VERSION,
};
use crate::verify::{run_suite, VerifyOptions, DEFAULT_SEED};

/// Thread count override; default is the available parallelism.
pub const THREADS_ENV: &str = "MIXSING_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "mixsing", version, about = "Mixed local-nonlocal singular elliptic problems")]
pub struct Cli {
    /// TOML file with problem parameters; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Continuation solve of one problem.
    Solve(SolveArgs),
    /// Boundary exponents over a parameter grid.
    Sweep(SweepArgs),
    /// Green columns and kernel ratio statistics.
    Green(GreenArgs),
    /// Principal eigenpair of the operator.
    Eigen(EigenArgs),
    /// Acceptance suite.
    Verify(VerifyArgs),
    /// Exponent table for given parameters.
    Formulas(FormulaArgs),
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemArgs {
    /// Dimension N.
    #[arg(long = "N", visible_alias = "dim")]
    #[serde(alias = "N")]
    pub dim: Option<usize>,
    #[arg(long)]
    pub shape: Option<Shape>,
    /// Resolution m.
    #[arg(long)]
    pub m: Option<usize>,
    /// Fractional order s.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Weight: const:<v> | deltapow:<zeta> | ldeltapow:<zeta> | file:<path>.
    #[arg(long)]
    pub weight: Option<String>,
    /// Summability exponent of a Lebesgue weight (default ∞).
    #[arg(long)]
    pub r: Option<f64>,
    /// Comma-separated n-schedule.
    #[arg(long, value_delimiter = ',')]
    pub schedule: Option<Vec<u64>>,
    #[arg(long)]
    pub continuation_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ProblemArgs {
    fn or(self, file: ProblemArgs) -> ProblemArgs {
        ProblemArgs {
            dim: self.dim.or(file.dim),
            shape: self.shape.or(file.shape),
            m: self.m.or(file.m),
            s: self.s.or(file.s),
            gamma: self.gamma.or(file.gamma),
            weight: self.weight.or(file.weight),
            r: self.r.or(file.r),
            schedule: self.schedule.or(file.schedule),
            continuation_tol: self.continuation_tol.or(file.continuation_tol),
            seed: self.seed.or(file.seed),
        }
    }

    fn spec(&self, default_dim: usize, default_shape: Shape, default_m: usize) -> Result<GridSpec> {
        let spec = GridSpec::new(
            self.dim.unwrap_or(default_dim),
            self.shape.unwrap_or(default_shape),
            self.m.unwrap_or(default_m),
        );
        spec.validate()?;
        Ok(spec)
    }

    fn order(&self) -> Result<f64> {
        let s = self.s.unwrap_or(0.5);
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Parameter(format!("order s = {s} outside (0,1)")));
        }
        Ok(s)
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// CSV profile along the midline ray.
    #[arg(long)]
    pub out_profile: Option<PathBuf>,
    /// CSV of the full solution.
    #[arg(long)]
    pub out_field: Option<PathBuf>,
    /// Binary dump of the dense matrix.
    #[arg(long)]
    pub dump_matrix: Option<PathBuf>,
    /// Run the nonexistence ladder (m, 2m+1, 4m+3) for a `deltapow` weight.
    #[arg(long)]
    pub nonexistence: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub zetas: Option<Vec<f64>>,
    /// Resolution ladder; nested pairs m' = 2m+1 use the refinement estimator.
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<usize>>,
    /// Sweep CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GreenArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Source node indices (default: five fixed interior points).
    #[arg(long, value_delimiter = ',')]
    pub sources: Option<Vec<usize>>,
    /// Pairs use nodes with δ ≥ factor·h.
    #[arg(long, default_value_t = 2.0)]
    pub factor: f64,
    /// CSV of the Green columns.
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    /// JSON statistics (stdout when absent).
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EigenArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// CSV of the eigenfunction.
    #[arg(long)]
    pub out_profile: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Smaller instances of every criterion.
    #[arg(long)]
    pub quick: bool,
    /// Criterion ids to run.
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FormulaArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Singular exponent ζ.
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepSection {
    gammas: Option<Vec<f64>>,
    zetas: Option<Vec<f64>>,
    ladder: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FormulaSection {
    zeta: Option<f64>,
}

/// `[problem]`, `[sweep]` and `[formulas]` tables.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    problem: ProblemArgs,
    sweep: SweepSection,
    formulas: FormulaSection,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Parses the weight mini-language against a grid.
pub fn parse_weight(text: &str, grid: &Grid, r: Option<f64>) -> Result<WeightSpec> {
    let (kind, arg) = text
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("weight `{text}`: expected <kind>:<value>")))?;
    let number = |a: &str| -> Result<f64> {
        a.trim().parse::<f64>().map_err(|_| Error::Parse(format!("weight `{text}`: `{a}` is not a number")))
    };
    let r = r.unwrap_or(f64::INFINITY);
    let w = match kind {
        "const" => {
            let v = number(arg)?;
            WeightSpec::Lebesgue { values: vec![v; grid.len()], r }
        }
        "deltapow" => WeightSpec::SingularPower { zeta: number(arg)? },
        "ldeltapow" => WeightSpec::lebesgue_delta_power(grid, number(arg)?, r),
        "file" => WeightSpec::Lebesgue { values: read_weight_file(Path::new(arg), grid)?, r },
        other => return Err(Error::Parse(format!("unknown weight kind `{other}` (const|deltapow|ldeltapow|file)"))),
    };
    w.validate(grid)?;
    Ok(w)
}

/// Header line `N m`, then one value per line in node order.
pub fn read_weight_file(path: &Path, grid: &Grid) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| Error::Parse(format!("{}: empty weight file", path.display())))?;
    let head: Vec<usize> = header
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("{}: bad header `{header}`", path.display()))))
        .collect::<Result<_>>()?;
    if head != [grid.dim(), grid.resolution()] {
        return Err(Error::Parse(format!(
            "{}: header {head:?} does not match N = {}, m = {}",
            path.display(),
            grid.dim(),
            grid.resolution()
        )));
    }
    let values: Vec<f64> = lines
        .map(|l| l.parse().map_err(|_| Error::Parse(format!("{}: bad value `{l}`", path.display()))))
        .collect::<Result<_>>()?;
    if values.len() != grid.len() {
        return Err(Error::SizeMismatch { expected: grid.len(), got: values.len() });
    }
    Ok(values)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => {
            let mut w = create(p)?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        None => writeln!(std::io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

/// `k, x1, …, xN, delta, value` along the midline ray.
pub fn write_ray_profile<W: Write>(grid: &Grid, values: &[f64], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = vec!["k".into()];
    header.extend((1..=grid.dim()).map(|a| format!("x{a}")));
    header.push("delta".into());
    header.push("value".into());
    wr.write_record(&header)?;
    for (k, node) in grid.midline_ray().into_iter().enumerate() {
        let mut rec = vec![k.to_string()];
        rec.extend(grid.coords()[node][..grid.dim()].iter().map(|c| format!("{c:.17e}")));
        rec.push(format!("{:.17e}", grid.delta()[node]));
        rec.push(format!("{:.17e}", values[node]));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

fn problem_from(args: &ProblemArgs) -> Result<SingularProblem> {
    let spec = args.spec(2, Shape::Box, 31)?;
    let grid = Arc::new(build_grid(spec)?);
    let weight = parse_weight(args.weight.as_deref().unwrap_or("const:1"), &grid, args.r)?;
    let gamma = args.gamma.unwrap_or(1.0);
    let op = Arc::new(MixedOperator::new(grid, args.order()?)?);
    let mut p = match weight {
        WeightSpec::SingularPower { zeta } if zeta >= 2.0 => SingularProblem::for_nonexistence(op, gamma, zeta)?,
        w => SingularProblem::with_operator(op, gamma, w)?,
    };
    if let Some(s) = &args.schedule {
        p.schedule = s.clone();
    }
    if let Some(t) = args.continuation_tol {
        p.tolerances.continuation = t;
    }
    p.validate()?;
    Ok(p)
}

fn cmd_solve(a: SolveArgs, file: FileConfig) -> Result<i32> {
    let args = a.problem.clone().or(file.problem);
    let p = problem_from(&args)?;
    if let Some(path) = &a.dump_matrix {
        let mut w = create(path)?;
        write_dense_dump(&p.op, &mut w)?;
        w.flush()?;
    }
    let report = if a.nonexistence || matches!(p.weight, WeightSpec::SingularPower { zeta } if zeta >= 2.0) {
        detect_nonexistence(&p)
    } else {
        continuation_solve(&p)
    };
    let report = match report {
        Ok(r) => r,
        Err(Error::Continuation { message, partial }) => {
            emit_json(&partial, a.out_json.as_deref())?;
            return Err(Error::Solver(message));
        }
        Err(e) => return Err(e),
    };
    write_solution(&report, &a)?;
    Ok(EXIT_OK)
}

fn write_solution(report: &SolutionReport, a: &SolveArgs) -> Result<()> {
    emit_json(report, a.out_json.as_deref())?;
    let pr = &report.problem;
    // the ladder variant reports on its finest level
    let grid = build_grid(GridSpec::new(pr.dim, pr.shape, pr.resolution))?;
    if let Some(path) = &a.out_profile {
        write_ray_profile(&grid, &report.solution, create(path)?)?;
    }
    if let Some(path) = &a.out_field {
        write_grid_function_csv(&grid, &report.solution, create(path)?)?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub dim: usize,
    pub m: usize,
    pub s: f64,
    pub gamma: f64,
    pub zeta_or_r: f64,
    pub kappa_pred: Option<f64>,
    pub kappa_fit: Option<f64>,
    pub stderr: Option<f64>,
    pub r2: Option<f64>,
    pub flag: Flag,
}

/// Solves one `(γ, ζ)` cell over the ladder.
fn sweep_cell(base: &ProblemArgs, gamma: f64, zeta: f64, ladder: &[usize]) -> Result<Vec<SweepRow>> {
    let s = base.order()?;
    let mut rows = Vec::new();
    let mut prev: Option<(usize, Arc<Grid>, Vec<f64>)> = None;
    for &m in ladder {
        let spec = ProblemArgs { m: Some(m), ..base.clone() }.spec(2, Shape::Box, m)?;
        let grid = Arc::new(build_grid(spec)?);
        let op = Arc::new(MixedOperator::new(grid.clone(), s)?);
        let row = |kappa_pred, fit: Option<(f64, f64, f64)>, flag| SweepRow {
            dim: spec.dim,
            m,
            s,
            gamma,
            zeta_or_r: zeta,
            kappa_pred,
            kappa_fit: fit.map(|f| f.0),
            stderr: fit.map(|f| f.1),
            r2: fit.map(|f| f.2),
            flag,
        };
        if zeta >= 2.0 {
            let p = SingularProblem::for_nonexistence(op, gamma, zeta)?;
            let report = detect_nonexistence(&p)?;
            rows.push(row(None, None, report.flag));
            continue;
        }
        let mut p = SingularProblem::with_operator(op, gamma, WeightSpec::SingularPower { zeta })?;
        if let Some(sch) = &base.schedule {
            p.schedule = sch.clone();
        }
        if let Some(t) = base.continuation_tol {
            p.tolerances.continuation = t;
        }
        let report = continuation_solve(&p)?;
        let pred = boundary_prediction(gamma, zeta, s)?;
        let mut fit = report.exponent_fit.fit.as_ref().map(|f| (f.exponent, f.stderr, f.r_squared));
        if let Some((pm, pg, pu)) = &prev {
            if m == 2 * pm + 1 {
                let mut opts = RefinementOptions::for_prediction(&pred);
                opts.delta_max = opts.delta_max.max(MIN_FIT_POINTS as f64 * pg.spacing());
                if let Ok(f) = refinement_exponent(pg, pu, &grid, &report.solution, &opts) {
                    fit = Some((f.exponent, f.stderr, f.r_squared));
                }
            }
        }
        rows.push(row(Some(pred.exponent), fit, report.flag));
        prev = Some((m, grid, report.solution));
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

fn cmd_sweep(a: SweepArgs, file: FileConfig) -> Result<i32> {
    let args = a.problem.or(file.problem);
    let gammas = a.gammas.or(file.sweep.gammas).unwrap_or_else(|| vec![1.0]);
    let zetas = a.zetas.or(file.sweep.zetas).unwrap_or_else(|| vec![0.5]);
    let ladder = a.ladder.or(file.sweep.ladder).unwrap_or_else(|| vec![args.m.unwrap_or(31)]);
    args.order()?;
    for &g in &gammas {
        for &z in &zetas {
            if z > 0.0 && !(g > 0.0) {
                return Err(Error::Regime(format!("ζ = {z} > 0 requires γ > 0")));
            }
            exponent_table(2, None, g, Some(z))?;
        }
    }
    for &m in &ladder {
        ProblemArgs { m: Some(m), ..args.clone() }.spec(2, Shape::Box, m)?;
    }
    let cells: Vec<(f64, f64)> = gammas.iter().flat_map(|&g| zetas.iter().map(move |&z| (g, z))).collect();
    let results: Vec<Result<Vec<SweepRow>>> = cells.par_iter().map(|&(g, z)| sweep_cell(&args, g, z, &ladder)).collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    match &a.out {
        Some(p) => write_sweep_csv(&rows, create(p)?)?,
        None => write_sweep_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct GreenOutput<'a> {
    schema_version: u32,
    dim: usize,
    shape: Shape,
    resolution: usize,
    s: f64,
    factor: f64,
    stats: &'a KernelStats,
}

fn cmd_green(a: GreenArgs, file: FileConfig) -> Result<i32> {
    let args = a.problem.or(file.problem);
    let spec = args.spec(3, Shape::Ball, 15)?;
    let grid = Arc::new(build_grid(spec)?);
    let s = args.order()?;
    let op = MixedOperator::new(grid.clone(), s)?;
    let sources = match a.sources {
        Some(v) => {
            if let Some(bad) = v.iter().find(|&&i| i >= grid.len()) {
                return Err(Error::Parameter(format!("source {bad} outside 0..{}", grid.len())));
            }
            v
        }
        None => {
            let cut = a.factor * grid.spacing();
            default_sources(&grid).into_iter().filter(|&y| grid.delta()[y] >= cut).collect()
        }
    };
    let (stats, cols) = green_kernel_ratios(&op, &sources, a.factor)?;
    if let Some(path) = &a.out_csv {
        let mut wr = csv::Writer::from_writer(create(path)?);
        let mut header: Vec<String> = (1..=grid.dim()).map(|k| format!("x{k}")).collect();
        header.push("delta".into());
        header.extend(sources.iter().map(|y| format!("G_{y}")));
        wr.write_record(&header)?;
        for i in 0..grid.len() {
            let mut rec: Vec<String> = grid.coords()[i][..grid.dim()].iter().map(|c| format!("{c:.17e}")).collect();
            rec.push(format!("{:.17e}", grid.delta()[i]));
            rec.extend(cols.iter().map(|c| format!("{:.17e}", c[i])));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
    }
    let out = GreenOutput {
        schema_version: SCHEMA_VERSION,
        dim: spec.dim,
        shape: spec.shape,
        resolution: spec.resolution,
        s,
        factor: a.factor,
        stats: &stats,
    };
    emit_json(&out, a.out_json.as_deref())?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct EigenOutput {
    schema_version: u32,
    dim: usize,
    shape: Shape,
    resolution: usize,
    s: f64,
    lambda: f64,
    iterations: usize,
    residual: f64,
}

fn cmd_eigen(a: EigenArgs, file: FileConfig) -> Result<i32> {
    let args = a.problem.or(file.problem);
    let spec = args.spec(2, Shape::Box, 31)?;
    let grid = Arc::new(build_grid(spec)?);
    let s = args.order()?;
    let op = MixedOperator::new(grid.clone(), s)?;
    let pair = principal_eigenpair(&op)?;
    if let Some(path) = &a.out_profile {
        write_grid_function_csv(&grid, &pair.phi, create(path)?)?;
    }
    let out = EigenOutput {
        schema_version: SCHEMA_VERSION,
        dim: spec.dim,
        shape: spec.shape,
        resolution: spec.resolution,
        s,
        lambda: pair.lambda,
        iterations: pair.iterations,
        residual: pair.residual,
    };
    emit_json(&out, a.out_json.as_deref())?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VerifyOutput {
    schema_version: u32,
    quick: bool,
    seed: u64,
    passed: bool,
    criteria: Vec<crate::verify::CriterionOutcome>,
}

fn cmd_verify(a: VerifyArgs, file: FileConfig) -> Result<i32> {
    let seed = a.seed.or(file.problem.seed).unwrap_or(DEFAULT_SEED);
    if let Some(bad) = a.only.iter().flatten().find(|&&id| !(1..=crate::verify::CRITERIA).contains(&id)) {
        return Err(Error::Parameter(format!("no criterion {bad}")));
    }
    let opts = VerifyOptions { quick: a.quick, only: a.only, seed };
    let outcomes = run_suite(&opts, |o| eprintln!("{o}"));
    let passed = outcomes.iter().all(|o| o.passed);
    let out = VerifyOutput { schema_version: SCHEMA_VERSION, quick: a.quick, seed, passed, criteria: outcomes };
    if let Some(p) = &a.out_json {
        emit_json(&out, Some(p))?;
    }
    eprintln!("{}", if passed { "all criteria passed" } else { "verification FAILED" });
    Ok(if passed { EXIT_OK } else { EXIT_VERIFY })
}

#[derive(Serialize)]
struct FormulaOutput {
    schema_version: u32,
    #[serde(flatten)]
    table: ExponentTable,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x}"))
}

fn cmd_formulas(a: FormulaArgs, file: FileConfig) -> Result<i32> {
    let args = a.problem.or(file.problem);
    let zeta = a.zeta.or(file.formulas.zeta);
    let table = exponent_table(args.dim.unwrap_or(3), args.r, args.gamma.unwrap_or(0.0), zeta)?;
    if a.json {
        emit_json(&FormulaOutput { schema_version: SCHEMA_VERSION, table }, None)?;
        return Ok(EXIT_OK);
    }
    let t = &table;
    let mut out = String::new();
    let lines = [
        ("N", Some(t.dim as f64)),
        ("r", t.r),
        ("gamma", Some(t.gamma)),
        ("zeta", t.zeta),
        ("2*", t.critical_exponent),
        ("q", t.q),
        ("r_sharp", t.r_sharp),
        ("S_r", t.s_r),
        ("sigma_r", t.sigma_r),
        ("sobolev_lower", t.sobolev_lower),
        ("L_star", t.l_star),
        ("regularity_threshold", t.regularity_threshold),
        ("kappa", t.kappa),
        ("beta", t.beta),
    ];
    for (name, v) in lines {
        out.push_str(&format!("{name} = {}\n", fmt_opt(v)));
    }
    let rg = &t.regimes;
    for (name, v) in [("r_vs_r_sharp", &rg.r_vs_r_sharp), ("r_vs_half_dim", &rg.r_vs_half_dim), ("singularity", &rg.singularity)] {
        out.push_str(&format!("{name} = {}\n", v.as_deref().unwrap_or("-")));
    }
    out.push_str(&format!("nonexistence = {}\n", rg.nonexistence));
    std::io::stdout().lock().write_all(out.as_bytes())?;
    Ok(EXIT_OK)
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Solver(_) | Error::Continuation { .. } | Error::TooFewPoints { .. } => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Parse(format!("{THREADS_ENV} = `{v}` is not a positive integer")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs a parsed command line and returns the exit status.
pub fn run(cli: Cli) -> i32 {
    let result = init_threads().and_then(|_| {
        let file = load_config(cli.config.as_deref())?;
        match cli.command {
            Command::Solve(a) => cmd_solve(a, file),
            Command::Sweep(a) => cmd_sweep(a, file),
            Command::Green(a) => cmd_green(a, file),
            Command::Eigen(a) => cmd_eigen(a, file),
            Command::Verify(a) => cmd_verify(a, file),
            Command::Formulas(a) => cmd_formulas(a, file),
        }
    });
    match result {
        Ok(code) => code,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses `args` (including the program name) and runs them.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
