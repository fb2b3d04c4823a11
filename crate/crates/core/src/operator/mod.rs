//! Discrete mixed operator `A = A_loc + A_frac` on a lattice grid.
//!
//! `A_loc` is the standard `2N+1`-point Dirichlet Laplacian. `A_frac` carries
//! the pairwise weights `w_ij = C h^N / |x_i − x_j|^{N+2s}` and the constant
//! diagonal `d = Σ_{j≠i} w_ij + tail_i`, where the sum runs over every lattice
//! point within the cutoff radius and the far field is integrated exactly.

mod constant;
mod dump;

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::Grid;
use crate::vecops::dot;

pub use constant::{cosine_integral, normalizing_constant, sphere_area};
pub use dump::{read_dense_dump, write_dense_dump, DumpHeader};

/// Grids up to this many nodes default to dense storage.
pub const DENSE_DEFAULT_LIMIT: usize = 1024;
/// Dense assembly is refused above this many nodes.
pub const DENSE_MAX_NODES: usize = 4096;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelfCellPolicy {
    /// The `j = i` cell contributes nothing.
    Omit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionalParams {
    pub order: f64,
    pub constant: f64,
    pub cutoff_radius: f64,
    pub self_cell: SelfCellPolicy,
}

impl FractionalParams {
    /// Parameters with the exact constant and the cutoff `R = 4·diam`.
    pub fn for_grid(grid: &Grid, s: f64) -> Result<Self> {
        Ok(FractionalParams {
            order: s,
            constant: normalizing_constant(grid.dim(), s)?,
            cutoff_radius: 4.0 * grid.diameter(),
            self_cell: SelfCellPolicy::Omit,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageMode {
    Dense,
    MatrixFree,
}

/// Stencil form of the Dirichlet Laplacian.
#[derive(Clone, Debug)]
pub struct LocalPart {
    scale: f64,
    dim: usize,
    neighbors: Vec<[u32; 6]>,
}

impl LocalPart {
    /// `1/h²`
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn diagonal(&self) -> f64 {
        2.0 * self.dim as f64 * self.scale
    }

    /// Interior neighbours of a node (face adjacency).
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[node].iter().filter(|&&k| k != NONE).map(|&k| k as usize)
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let diag = self.diagonal();
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let mut acc = diag * u[i];
            for &k in &self.neighbors[i] {
                if k != NONE {
                    acc -= self.scale * u[k as usize];
                }
            }
            *o = acc;
        });
    }
}

pub fn assemble_local(grid: &Grid) -> LocalPart {
    let n = grid.dim();
    let neighbors = (0..grid.len())
        .map(|i| {
            let mut nb = [NONE; 6];
            for a in 0..n {
                for (k, dir) in [-1isize, 1].into_iter().enumerate() {
                    if let Some(j) = grid.neighbor(i, a, dir) {
                        nb[2 * a + k] = j as u32;
                    }
                }
            }
            nb
        })
        .collect();
    LocalPart { scale: 1.0 / (grid.spacing() * grid.spacing()), dim: n, neighbors }
}

/// A maximal run of interior nodes along axis 0 sharing the other lattice indices.
#[derive(Clone, Copy, Debug)]
struct Row {
    j1: usize,
    j2: usize,
    lo: usize,
    hi: usize,
    start: usize,
}

/// Fractional part: kernel table, rows of the lattice, diagonal and tails.
#[derive(Clone, Debug)]
pub struct FractionalPart {
    params: FractionalParams,
    m: usize,
    dim: usize,
    width: usize,
    table: Vec<f64>,
    rows: Vec<Row>,
    diagonal: f64,
    tail: Vec<f64>,
}

fn lattice_rows(grid: &Grid) -> Vec<Row> {
    let m = grid.resolution();
    let n_other = if grid.dim() == 3 { m * m } else { m };
    let node_of = grid.node_of_lattice();
    let mut rows = Vec::new();
    for r in 0..n_other {
        let base = r * m;
        let mut lo = None;
        let mut hi = 0;
        let mut start = 0;
        for i0 in 0..m {
            let k = node_of[base + i0];
            if k != NONE {
                if lo.is_none() {
                    lo = Some(i0);
                    start = k as usize;
                }
                hi = i0 + 1;
            }
        }
        if let Some(lo) = lo {
            rows.push(Row { j1: r % m, j2: r / m, lo, hi, start });
        }
    }
    rows
}

/// `Σ_{k ∈ ℤ^N, 0 < |k| ≤ K} |k|^{−N−2s}` over the lattice ball of radius `K`.
pub fn lattice_sum(dim: usize, s: f64, radius: f64) -> f64 {
    let e = (dim as f64 + 2.0 * s) / 2.0;
    let kmax = radius.floor() as i64;
    let r2max = radius * radius;
    let mult = |k: i64| if k == 0 { 1.0 } else { 2.0 };
    let mut total = 0.0;
    if dim == 1 {
        for a in 1..=kmax {
            total += 2.0 * (a as f64).powf(-2.0 * e);
        }
        return total;
    }
    for a in 0..=kmax {
        let a2 = (a * a) as f64;
        if dim == 2 {
            let mut row = 0.0;
            for b in 0..=kmax {
                let r2 = a2 + (b * b) as f64;
                if r2 > r2max {
                    break;
                }
                if r2 > 0.0 {
                    row += mult(b) * r2.powf(-e);
                }
            }
            total += mult(a) * row;
        } else {
            let mut plane = 0.0;
            for b in 0..=kmax {
                let ab2 = a2 + (b * b) as f64;
                if ab2 > r2max {
                    break;
                }
                let mut row = 0.0;
                for c in 0..=kmax {
                    let r2 = ab2 + (c * c) as f64;
                    if r2 > r2max {
                        break;
                    }
                    if r2 > 0.0 {
                        row += mult(c) * r2.powf(-e);
                    }
                }
                plane += mult(b) * row;
            }
            total += mult(a) * plane;
        }
    }
    total
}

pub fn assemble_fractional(grid: &Grid, params: FractionalParams) -> Result<FractionalPart> {
    let s = params.order;
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Parameter(format!("order s = {s} outside (0,1)")));
    }
    if params.cutoff_radius < 2.0 * grid.diameter() {
        return Err(Error::Parameter(format!(
            "cutoff radius {} below twice the diameter {}",
            params.cutoff_radius,
            2.0 * grid.diameter()
        )));
    }
    let m = grid.resolution();
    let dim = grid.dim();
    let h = grid.spacing();
    let c = params.constant;
    let e = (dim as f64 + 2.0 * s) / 2.0;
    let scale = c * h.powf(-2.0 * s);
    let width = 2 * m - 1;
    let planes = if dim == 3 { m } else { 1 };
    let mut table = vec![0.0; planes * m * width];
    for cc in 0..planes {
        for b in 0..m {
            let row = &mut table[(cc * m + b) * width..(cc * m + b + 1) * width];
            for (t, slot) in row.iter_mut().enumerate() {
                let a = t as isize - (m as isize - 1);
                let r2 = (a * a) as f64 + (b * b) as f64 + (cc * cc) as f64;
                *slot = if r2 > 0.0 { scale * r2.powf(-e) } else { 0.0 };
            }
        }
    }
    let radius = params.cutoff_radius;
    let diagonal = scale * lattice_sum(dim, s, radius / h)
        + c * sphere_area(dim) * radius.powf(-2.0 * s) / (2.0 * s);
    let mut part = FractionalPart {
        params,
        m,
        dim,
        width,
        table,
        rows: lattice_rows(grid),
        diagonal,
        tail: Vec::new(),
    };
    let ones = vec![1.0; grid.len()];
    let mut w1 = vec![0.0; grid.len()];
    part.apply_weights(&ones, &mut w1);
    part.tail = w1.iter().map(|v| diagonal - v).collect();
    Ok(part)
}

impl FractionalPart {
    pub fn params(&self) -> &FractionalParams {
        &self.params
    }

    /// Constant diagonal `d`.
    pub fn diagonal(&self) -> f64 {
        self.diagonal
    }

    /// Exterior deficits `tail_i = d − Σ_{j≠i} w_ij`.
    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    /// Weight between lattice points with offset `(a, b, c)`.
    pub fn weight(&self, a: usize, b: usize, c: usize) -> f64 {
        let cc = if self.dim == 3 { c } else { 0 };
        self.table[(cc * self.m + b) * self.width + a + self.m - 1]
    }

    fn table_row(&self, b: usize, c: usize) -> &[f64] {
        let at = (c * self.m + b) * self.width;
        &self.table[at..at + self.width]
    }

    /// `out = W u` with `W` the off-diagonal weight matrix (nonnegative entries).
    pub fn apply_weights(&self, u: &[f64], out: &mut [f64]) {
        let mut slices: Vec<&mut [f64]> = Vec::with_capacity(self.rows.len());
        let mut rest = out;
        for r in &self.rows {
            let (head, tail) = rest.split_at_mut(r.hi - r.lo);
            slices.push(head);
            rest = tail;
        }
        let m = self.m;
        self.rows.par_iter().zip(slices.into_par_iter()).for_each(|(ro, o)| {
            o.iter_mut().for_each(|v| *v = 0.0);
            for src in &self.rows {
                let b = ro.j1.abs_diff(src.j1);
                let c = ro.j2.abs_diff(src.j2);
                let kr = self.table_row(b, c);
                let us = &u[src.start..src.start + (src.hi - src.lo)];
                for (k, ov) in o.iter_mut().enumerate() {
                    let i0 = ro.lo + k;
                    let off = m - 1 - i0 + src.lo;
                    *ov += dot(&kr[off..off + us.len()], us);
                }
            }
        });
    }

    /// `out = A_frac u`
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        self.apply_weights(u, out);
        out.par_iter_mut().zip(u.par_iter()).for_each(|(o, &ui)| *o = self.diagonal * ui - *o);
    }
}

/// The assembled discrete mixed operator.
#[derive(Clone, Debug)]
pub struct MixedOperator {
    grid: Arc<Grid>,
    local: LocalPart,
    frac: FractionalPart,
    storage: StorageMode,
    dense: Option<Arc<DMatrix<f64>>>,
}

impl MixedOperator {
    /// Operator with exact constant, `R = 4·diam`, and default storage.
    pub fn new(grid: Arc<Grid>, s: f64) -> Result<Self> {
        let params = FractionalParams::for_grid(&grid, s)?;
        let storage = if grid.len() <= DENSE_DEFAULT_LIMIT {
            StorageMode::Dense
        } else {
            StorageMode::MatrixFree
        };
        Self::with_params(grid, params, storage)
    }

    pub fn with_params(grid: Arc<Grid>, params: FractionalParams, storage: StorageMode) -> Result<Self> {
        let local = assemble_local(&grid);
        let frac = assemble_fractional(&grid, params)?;
        let mut op = MixedOperator { grid, local, frac, storage, dense: None };
        if storage == StorageMode::Dense {
            op.dense = Some(Arc::new(op.assemble_dense()?));
        }
        Ok(op)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> Arc<Grid> {
        Arc::clone(&self.grid)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn order(&self) -> f64 {
        self.frac.params.order
    }

    pub fn storage(&self) -> StorageMode {
        self.storage
    }

    pub fn local(&self) -> &LocalPart {
        &self.local
    }

    pub fn fractional(&self) -> &FractionalPart {
        &self.frac
    }

    /// Diagonal entry of row `i` of `A`.
    pub fn diagonal(&self, i: usize) -> f64 {
        let _ = i;
        self.local.diagonal() + self.frac.diagonal
    }

    /// Entry `A_ij` computed from the stencil and kernel table.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal(i);
        }
        let li = self.grid.lattice_index(i);
        let lj = self.grid.lattice_index(j);
        let a = li[0].abs_diff(lj[0]);
        let b = li[1].abs_diff(lj[1]);
        let c = li[2].abs_diff(lj[2]);
        let mut v = -self.frac.weight(a, b, c);
        if a + b + c == 1 {
            v -= self.local.scale;
        }
        v
    }

    /// Dense copy of `A`.
    pub fn assemble_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.len();
        if n > DENSE_MAX_NODES {
            return Err(Error::Parameter(format!(
                "dense assembly limited to {DENSE_MAX_NODES} nodes, grid has {n}"
            )));
        }
        let cols: Vec<Vec<f64>> = (0..n).into_par_iter().map(|j| (0..n).map(|i| self.entry(i, j)).collect()).collect();
        Ok(DMatrix::from_fn(n, n, |i, j| cols[j][i]))
    }

    pub fn dense(&self) -> Option<&DMatrix<f64>> {
        self.dense.as_deref()
    }

    /// `out = A u` without size checks.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        match &self.dense {
            Some(a) => {
                let x = nalgebra::DVectorView::from_slice(u, u.len());
                let mut y = nalgebra::DVectorViewMut::from_slice(out, u.len());
                y.gemv(1.0, a, &x, 0.0);
            }
            None => self.apply_matrix_free(u, out),
        }
    }

    pub fn apply_matrix_free(&self, u: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; u.len()];
        self.local.apply(u, out);
        self.frac.apply(u, &mut tmp);
        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), u.len())?;
        let mut out = vec![0.0; u.len()];
        self.apply_into(u, &mut out);
        Ok(out)
    }

    pub fn apply_local(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), u.len())?;
        let mut out = vec![0.0; u.len()];
        self.local.apply(u, &mut out);
        Ok(out)
    }

    pub fn apply_fractional(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), u.len())?;
        let mut out = vec![0.0; u.len()];
        self.frac.apply(u, &mut out);
        Ok(out)
    }

    /// `uᵀ A u · h^N`
    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        Ok(dot(u, &self.apply(u)?) * self.grid.cell_volume())
    }

    /// `uᵀ A_frac u · h^N`
    pub fn fractional_energy(&self, u: &[f64]) -> Result<f64> {
        Ok(dot(u, &self.apply_fractional(u)?) * self.grid.cell_volume())
    }

    /// `uᵀ A_loc u · h^N`
    pub fn local_energy(&self, u: &[f64]) -> Result<f64> {
        Ok(dot(u, &self.apply_local(u)?) * self.grid.cell_volume())
    }
}

/// Discrete Dirichlet energy `Σ |∇_h u|² h^N`, forward differences, zero exterior.
pub fn dirichlet_energy(grid: &Grid, u: &[f64]) -> Result<f64> {
    check_len(grid.len(), u.len())?;
    let mut total = 0.0;
    for i in 0..grid.len() {
        for a in 0..grid.dim() {
            let back = grid.neighbor(i, a, -1).map_or(0.0, |j| u[j]);
            total += (u[i] - back).powi(2);
            if grid.neighbor(i, a, 1).is_none() {
                total += u[i] * u[i];
            }
        }
    }
    Ok(total * grid.spacing().powi(grid.dim() as i32 - 2))
}

/// `max_ψ |⟨Au − rhs, ψ⟩| h^N` over unit bumps `ψ = e_k`.
pub fn weak_residual(op: &MixedOperator, u: &[f64], rhs: &[f64]) -> Result<f64> {
    check_len(op.len(), rhs.len())?;
    let au = op.apply(u)?;
    let worst = au.iter().zip(rhs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(worst * op.grid().cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};

    fn op(m: usize, s: f64, storage: StorageMode) -> MixedOperator {
        let g = Arc::new(build_grid(GridSpec::unit_box(2, m)).unwrap());
        let p = FractionalParams::for_grid(&g, s).unwrap();
        MixedOperator::with_params(g, p, storage).unwrap()
    }

    #[test]
    fn local_part_on_quadratic() {
        let g = build_grid(GridSpec::unit_box(2, 15)).unwrap();
        let loc = assemble_local(&g);
        let u = g.sample(|x, _| x[0] * x[0]);
        let mut out = vec![0.0; u.len()];
        loc.apply(&u, &mut out);
        for i in 0..g.len() {
            if loc.neighbors(i).count() == 4 {
                assert!((out[i] + 2.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cutoff_guard() {
        let g = build_grid(GridSpec::unit_box(2, 7)).unwrap();
        let mut p = FractionalParams::for_grid(&g, 0.5).unwrap();
        p.cutoff_radius = g.diameter();
        assert!(assemble_fractional(&g, p).is_err());
    }

    #[test]
    fn ones_leave_tail() {
        let o = op(15, 0.5, StorageMode::MatrixFree);
        let u = vec![1.0; o.len()];
        let out = o.apply_fractional(&u).unwrap();
        for (v, t) in out.iter().zip(o.fractional().tail()) {
            assert!((v - t).abs() < 1e-9 * o.fractional().diagonal());
            assert!(*t > 0.0);
        }
    }

    #[test]
    fn dense_matches_matrix_free() {
        let d = op(15, 0.5, StorageMode::Dense);
        let f = op(15, 0.5, StorageMode::MatrixFree);
        let u = d.grid().sample(|x, dd| (3.0 * x[0]).sin() + dd * x[1]);
        let a = d.apply(&u).unwrap();
        let b = f.apply(&u).unwrap();
        let diff = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-12 * crate::vecops::max_abs(&a).max(1.0), "{diff}");
    }
}
