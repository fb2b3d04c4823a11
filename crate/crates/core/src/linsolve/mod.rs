//! Linear solves with the mixed operator, Green columns and the principal eigenpair.

mod banded;

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::operator::{MixedOperator, DENSE_MAX_NODES};
use crate::vecops::{axpy, dot, max, norm2};

pub use banded::BandedCholesky;

/// Auto mode factors densely up to this many nodes.
pub const DIRECT_AUTO_LIMIT: usize = 1200;
/// Banded preconditioning is skipped when `n · bw²` exceeds this.
const BAND_WORK_LIMIT: f64 = 1.2e10;

pub const DEFAULT_DIRECT_TOL: f64 = 1e-10;
pub const DEFAULT_ITERATIVE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Direct,
    ConjugateGradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodChoice {
    Auto,
    Direct,
    Iterative,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub method: MethodChoice,
    /// Relative residual target; `None` picks the method default.
    pub tol: Option<f64>,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { method: MethodChoice::Auto, tol: None, max_iter: 5000 }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions { tol: Some(tol), ..Default::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearSolveResult {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub method: Method,
}

enum Factor {
    Dense(Cholesky<f64, Dyn>),
    Banded(BandedCholesky),
    Jacobi(Vec<f64>),
}

/// A factorized (or preconditioned) system `(A + diag(shift)) x = b`.
pub struct LinearSolver<'a> {
    op: &'a MixedOperator,
    shift: Option<Vec<f64>>,
    factor: Factor,
    tol: f64,
    max_iter: usize,
}

impl<'a> LinearSolver<'a> {
    pub fn new(op: &'a MixedOperator, shift: Option<Vec<f64>>, opts: SolveOptions) -> Result<Self> {
        let n = op.len();
        if let Some(sh) = &shift {
            check_len(n, sh.len())?;
            if sh.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::Parameter("diagonal shift must be finite and nonnegative".into()));
            }
        }
        let direct = match opts.method {
            MethodChoice::Direct => {
                if n > DENSE_MAX_NODES {
                    return Err(Error::Parameter(format!("direct solve limited to {DENSE_MAX_NODES} nodes")));
                }
                true
            }
            MethodChoice::Iterative => false,
            MethodChoice::Auto => n <= DIRECT_AUTO_LIMIT,
        };
        let factor = if direct {
            let mut a = match op.dense() {
                Some(a) => a.clone(),
                None => op.assemble_dense()?,
            };
            if let Some(sh) = &shift {
                for (i, v) in sh.iter().enumerate() {
                    a[(i, i)] += v;
                }
            }
            let chol = Cholesky::new(a).ok_or_else(|| Error::Solver("matrix is not positive definite".into()))?;
            Factor::Dense(chol)
        } else {
            preconditioner(op, shift.as_deref())
        };
        let tol = opts.tol.unwrap_or(if direct { DEFAULT_DIRECT_TOL } else { DEFAULT_ITERATIVE_TOL });
        Ok(LinearSolver { op, shift, factor, tol, max_iter: opts.max_iter })
    }

    pub fn method(&self) -> Method {
        match self.factor {
            Factor::Dense(_) => Method::Direct,
            _ => Method::ConjugateGradient,
        }
    }

    /// `out = (A + diag(shift)) x`
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.op.apply_into(x, out);
        if let Some(sh) = &self.shift {
            for ((o, s), xi) in out.iter_mut().zip(sh).zip(x) {
                *o += s * xi;
            }
        }
    }

    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        match &self.factor {
            Factor::Dense(c) => {
                let sol = c.solve(&DVector::from_column_slice(r));
                z.copy_from_slice(sol.as_slice());
            }
            Factor::Banded(b) => {
                z.copy_from_slice(r);
                b.solve_in_place(z);
            }
            Factor::Jacobi(d) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(d) {
                    *zi = ri / di;
                }
            }
        }
    }

    pub fn solve(&self, rhs: &[f64], x0: Option<&[f64]>) -> Result<LinearSolveResult> {
        let n = self.op.len();
        check_len(n, rhs.len())?;
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("right-hand side is not finite".into()));
        }
        let bnorm = norm2(rhs);
        if bnorm == 0.0 {
            return Ok(LinearSolveResult {
                solution: vec![0.0; n],
                iterations: 0,
                relative_residual: 0.0,
                method: self.method(),
            });
        }
        if let Factor::Dense(_) = self.factor {
            let mut x = vec![0.0; n];
            self.precondition(rhs, &mut x);
            let mut r = vec![0.0; n];
            self.apply(&x, &mut r);
            let mut rel = norm2(&crate::vecops::sub(rhs, &r)) / bnorm;
            let mut it = 1;
            // one step of iterative refinement if the factorization lost accuracy
            if rel > self.tol {
                let res = crate::vecops::sub(rhs, &r);
                let mut dx = vec![0.0; n];
                self.precondition(&res, &mut dx);
                axpy(1.0, &dx, &mut x);
                self.apply(&x, &mut r);
                rel = norm2(&crate::vecops::sub(rhs, &r)) / bnorm;
                it += 1;
            }
            if rel > self.tol {
                return Err(Error::Solver(format!("direct solve residual {rel:.3e} above {:.1e}", self.tol)));
            }
            return Ok(LinearSolveResult { solution: x, iterations: it, relative_residual: rel, method: Method::Direct });
        }
        self.pcg(rhs, x0, bnorm)
    }

    fn pcg(&self, b: &[f64], x0: Option<&[f64]>, bnorm: f64) -> Result<LinearSolveResult> {
        let n = b.len();
        let mut x = match x0 {
            Some(v) => {
                check_len(n, v.len())?;
                v.to_vec()
            }
            None => vec![0.0; n],
        };
        let mut r = vec![0.0; n];
        self.apply(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let mut z = vec![0.0; n];
        self.precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut q = vec![0.0; n];
        let mut it = 0;
        let mut rel = norm2(&r) / bnorm;
        while rel > self.tol {
            if it >= self.max_iter {
                return Err(Error::Solver(format!(
                    "conjugate gradients stopped after {it} iterations at relative residual {rel:.3e}"
                )));
            }
            self.apply(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                return Err(Error::Solver("conjugate gradients broke down (non-positive curvature)".into()));
            }
            let alpha = rz / pq;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &q, &mut r);
            it += 1;
            rel = norm2(&r) / bnorm;
            if rel <= self.tol {
                break;
            }
            self.precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        // true residual
        self.apply(&x, &mut q);
        let true_rel = norm2(&crate::vecops::sub(b, &q)) / bnorm;
        if true_rel > 10.0 * self.tol {
            return Err(Error::Solver(format!(
                "conjugate gradients drifted: recursive residual {rel:.3e}, true residual {true_rel:.3e}"
            )));
        }
        Ok(LinearSolveResult { solution: x, iterations: it, relative_residual: true_rel, method: Method::ConjugateGradient })
    }

    /// `G(·, y)`: solution of `A g = e_y / h^N`.
    pub fn green_column(&self, y: usize) -> Result<Vec<f64>> {
        let n = self.op.len();
        if y >= n {
            return Err(Error::Parameter(format!("source node {y} outside grid of {n} nodes")));
        }
        let mut e = vec![0.0; n];
        e[y] = 1.0 / self.op.grid().cell_volume();
        Ok(self.solve(&e, None)?.solution)
    }
}

/// Sparse SPD approximation `A_loc + d I + shift − W_near` and its band factor.
fn preconditioner(op: &MixedOperator, shift: Option<&[f64]>) -> Factor {
    let grid = op.grid();
    let n = grid.len();
    let dim = grid.dim();
    let offsets = near_offsets(dim);
    let mut bw = 0usize;
    for i in 0..n {
        for o in &offsets {
            if let Some(j) = offset_node(grid, i, o) {
                if j < i {
                    bw = bw.max(i - j);
                }
            }
        }
    }
    let diag: Vec<f64> = (0..n).map(|i| op.diagonal(i) + shift.map_or(0.0, |s| s[i])).collect();
    if (n as f64) * (bw as f64).powi(2) > BAND_WORK_LIMIT {
        return Factor::Jacobi(diag);
    }
    let mut band = BandedCholesky::zeros(n, bw);
    for i in 0..n {
        band.set(i, i, diag[i]);
        for o in &offsets {
            if let Some(j) = offset_node(grid, i, o) {
                if j < i {
                    band.add(i, j, op.entry(i, j));
                }
            }
        }
    }
    if band.factor() {
        Factor::Banded(band)
    } else {
        Factor::Jacobi(diag)
    }
}

fn near_offsets(dim: usize) -> Vec<[isize; 3]> {
    let mut out = Vec::new();
    let r = |use_axis: bool| if use_axis { -1..=1 } else { 0..=0 };
    for c in r(dim == 3) {
        for b in -1..=1 {
            for a in -1..=1 {
                if (a, b, c) != (0, 0, 0) {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

fn offset_node(grid: &Grid, i: usize, o: &[isize; 3]) -> Option<usize> {
    let l = grid.lattice_index(i);
    grid.node_at([l[0] as isize + o[0], l[1] as isize + o[1], l[2] as isize + o[2]])
}

/// Solve `A u = rhs` with default options.
pub fn solve_dirichlet(op: &MixedOperator, rhs: &[f64]) -> Result<LinearSolveResult> {
    LinearSolver::new(op, None, SolveOptions::default())?.solve(rhs, None)
}

/// Discrete energy functional `½ uᵀAu h^N − ⟨rhs, u⟩ h^N`.
pub fn energy_value(op: &MixedOperator, u: &[f64], rhs: &[f64]) -> Result<f64> {
    check_len(op.len(), rhs.len())?;
    let vol = op.grid().cell_volume();
    Ok(0.5 * op.energy(u)? - dot(rhs, u) * vol)
}

pub fn green_column(op: &MixedOperator, y: usize) -> Result<Vec<f64>> {
    LinearSolver::new(op, None, SolveOptions::with_tol(1e-12))?.green_column(y)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: f64,
    pub phi: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

pub const EIGEN_TOL: f64 = 1e-8;
pub const EIGEN_MAX_ITER: usize = 500;

/// Principal eigenpair by inverse power iteration, `max φ₁ = 1`.
pub fn principal_eigenpair(op: &MixedOperator) -> Result<EigenPair> {
    let solver = LinearSolver::new(op, None, SolveOptions::with_tol(1e-13))?;
    let n = op.len();
    let mut v = op.grid().delta().to_vec();
    let mut av = vec![0.0; n];
    let mut lambda_prev = f64::INFINITY;
    for it in 1..=EIGEN_MAX_ITER {
        let w = solver.solve(&v, None)?.solution;
        let nrm = norm2(&w);
        v = w.iter().map(|x| x / nrm).collect();
        op.apply_into(&v, &mut av);
        let lambda = dot(&v, &av);
        let res: Vec<f64> = av.iter().zip(&v).map(|(a, x)| a - lambda * x).collect();
        let residual = norm2(&res) / lambda;
        if (lambda - lambda_prev).abs() <= EIGEN_TOL * lambda && residual <= EIGEN_TOL {
            let top = max(&v);
            let phi: Vec<f64> = v.iter().map(|x| x / top).collect();
            if phi.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::Solver("principal eigenvector is not positive".into()));
            }
            return Ok(EigenPair { lambda, phi, iterations: it, residual });
        }
        lambda_prev = lambda;
    }
    Err(Error::Solver(format!("inverse iteration did not settle in {EIGEN_MAX_ITER} iterations")))
}

/// Writes `x1,…,xN,delta,value` rows.
pub fn write_grid_function_csv<W: Write>(grid: &Grid, values: &[f64], w: W) -> Result<()> {
    check_len(grid.len(), values.len())?;
    let mut wr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (1..=grid.dim()).map(|a| format!("x{a}")).collect();
    header.push("delta".into());
    header.push("value".into());
    wr.write_record(&header)?;
    for (i, v) in values.iter().enumerate() {
        let x = grid.coords()[i];
        let mut rec: Vec<String> = x[..grid.dim()].iter().map(|c| format!("{c:.17e}")).collect();
        rec.push(format!("{:.17e}", grid.delta()[i]));
        rec.push(format!("{v:.17e}"));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// Dense `A` as an `nalgebra` matrix (small grids).
pub fn dense_matrix(op: &MixedOperator) -> Result<DMatrix<f64>> {
    match op.dense() {
        Some(a) => Ok(a.clone()),
        None => op.assemble_dense(),
    }
}
