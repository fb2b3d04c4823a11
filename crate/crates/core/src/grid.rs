//! Uniform Cartesian lattices on the unit box `(0,1)^N` and the unit ball.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted resolution.
pub const MIN_RESOLUTION: usize = 3;

const OUTSIDE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Box,
    Ball,
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(Shape::Box),
            "ball" => Ok(Shape::Ball),
            other => Err(Error::Parse(format!("unknown shape `{other}` (box|ball)"))),
        }
    }
}

/// Grid description: dimension, shape and resolution `m`.
///
/// For the box `m` counts interior nodes per axis; for the ball it counts
/// lattice nodes across the diameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub shape: Shape,
    pub resolution: usize,
}

impl GridSpec {
    pub fn new(dim: usize, shape: Shape, resolution: usize) -> Self {
        GridSpec { dim, shape, resolution }
    }

    pub fn unit_box(dim: usize, resolution: usize) -> Self {
        Self::new(dim, Shape::Box, resolution)
    }

    pub fn unit_ball(dim: usize, resolution: usize) -> Self {
        Self::new(dim, Shape::Ball, resolution)
    }

    pub fn spacing(&self) -> f64 {
        let m = self.resolution as f64;
        match self.shape {
            Shape::Box => 1.0 / (m + 1.0),
            Shape::Ball => 2.0 / (m + 1.0),
        }
    }

    /// Spec of the grid obtained by halving the spacing.
    pub fn refined(&self) -> Self {
        Self::new(self.dim, self.shape, 2 * self.resolution + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::Grid(format!("dimension must be 2 or 3, got {}", self.dim)));
        }
        if self.resolution < MIN_RESOLUTION {
            return Err(Error::Grid(format!(
                "resolution must be at least {MIN_RESOLUTION}, got {}",
                self.resolution
            )));
        }
        Ok(())
    }
}

/// Interior nodes of a lattice together with their distance to the boundary.
#[derive(Clone, Debug)]
pub struct Grid {
    spec: GridSpec,
    h: f64,
    origin: f64,
    coords: Vec<[f64; 3]>,
    lattice: Vec<[usize; 3]>,
    delta: Vec<f64>,
    node_of: Vec<u32>,
    diameter: f64,
}

pub fn build_grid(spec: GridSpec) -> Result<Grid> {
    spec.validate()?;
    let m = spec.resolution;
    let n = spec.dim;
    let h = spec.spacing();
    let origin = match spec.shape {
        Shape::Box => h,
        Shape::Ball => -1.0 + h,
    };
    let lattice_len = m.pow(n as u32);
    if lattice_len >= OUTSIDE as usize {
        return Err(Error::Grid("lattice too large".into()));
    }
    let mut coords = Vec::new();
    let mut lattice = Vec::new();
    let mut delta = Vec::new();
    let mut node_of = vec![OUTSIDE; lattice_len];
    for (lin, slot) in node_of.iter_mut().enumerate() {
        let idx = unflatten(lin, m, n);
        let mut x = [0.0; 3];
        for a in 0..n {
            x[a] = origin + idx[a] as f64 * h;
        }
        let d = match spec.shape {
            Shape::Box => (0..n).map(|a| x[a].min(1.0 - x[a])).fold(f64::INFINITY, f64::min),
            Shape::Ball => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r >= 1.0 {
                    continue;
                }
                1.0 - r
            }
        };
        *slot = coords.len() as u32;
        coords.push(x);
        lattice.push(idx);
        delta.push(d);
    }
    let diameter = match spec.shape {
        Shape::Box => (n as f64).sqrt(),
        Shape::Ball => 2.0,
    };
    Ok(Grid { spec, h, origin, coords, lattice, delta, node_of, diameter })
}

fn unflatten(mut lin: usize, m: usize, n: usize) -> [usize; 3] {
    let mut idx = [0; 3];
    for slot in idx.iter_mut().take(n) {
        *slot = lin % m;
        lin /= m;
    }
    idx
}

impl Grid {
    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn shape(&self) -> Shape {
        self.spec.shape
    }

    pub fn resolution(&self) -> usize {
        self.spec.resolution
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Cell volume `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.spec.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn lattice_index(&self, node: usize) -> [usize; 3] {
        self.lattice[node]
    }

    /// Number of lattice points in the bounding cube, `m^N`.
    pub fn lattice_len(&self) -> usize {
        self.node_of.len()
    }

    /// True when every lattice point is an interior node (box grids).
    pub fn is_full(&self) -> bool {
        self.coords.len() == self.node_of.len()
    }

    /// Linear lattice position of a node (axis 0 fastest).
    pub fn lattice_position(&self, node: usize) -> usize {
        let m = self.spec.resolution;
        let idx = self.lattice[node];
        idx[0] + m * (idx[1] + m * idx[2])
    }

    /// Node at a lattice multi-index; `None` outside the lattice or the domain.
    pub fn node_at(&self, idx: [isize; 3]) -> Option<usize> {
        let m = self.spec.resolution as isize;
        let mut lin = 0usize;
        let mut stride = 1usize;
        for &i in idx.iter().take(self.spec.dim) {
            if i < 0 || i >= m {
                return None;
            }
            lin += i as usize * stride;
            stride *= m as usize;
        }
        match self.node_of[lin] {
            OUTSIDE => None,
            k => Some(k as usize),
        }
    }

    pub(crate) fn node_of_lattice(&self) -> &[u32] {
        &self.node_of
    }

    /// Coordinate of lattice index 0 along every axis.
    pub fn origin(&self) -> f64 {
        self.origin
    }

    /// Nodes on the inward normal ray from the midpoint of the face `x_1 = min`,
    /// ordered from the boundary towards the centre.
    ///
    /// Exact midline for odd `m`; for even `m` the ray sits half a cell off.
    pub fn midline_ray(&self) -> Vec<usize> {
        let m = self.spec.resolution;
        let c = ((m - 1) / 2) as isize;
        let mut out = Vec::new();
        for k in 0..=c {
            let mut idx = [0isize; 3];
            idx[0] = k;
            for slot in idx.iter_mut().take(self.spec.dim).skip(1) {
                *slot = c;
            }
            if let Some(node) = self.node_at(idx) {
                out.push(node);
            }
        }
        out
    }

    /// Index of the node closest to the domain centre.
    pub fn center_node(&self) -> usize {
        let c = ((self.spec.resolution - 1) / 2) as isize;
        self.node_at([c, c, if self.spec.dim == 3 { c } else { 0 }])
            .expect("centre node is interior")
    }

    /// Nodes of the lattice neighbour in direction `axis`, `dir = ±1`.
    pub fn neighbor(&self, node: usize, axis: usize, dir: isize) -> Option<usize> {
        let l = self.lattice[node];
        let mut idx = [l[0] as isize, l[1] as isize, l[2] as isize];
        idx[axis] += dir;
        self.node_at(idx)
    }

    /// Sample a function of position and distance at every node.
    pub fn sample<F: Fn(&[f64; 3], f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.coords.iter().zip(&self.delta).map(|(x, &d)| f(x, d)).collect()
    }
}

/// Nodes with `δ < η`.
pub fn boundary_band(grid: &Grid, eta: f64) -> Result<Vec<usize>> {
    let half = grid.diameter() / 2.0;
    if !(eta > 0.0 && eta < half) {
        return Err(Error::Parameter(format!("band width {eta} outside (0, {half})")));
    }
    Ok(grid
        .delta()
        .iter()
        .enumerate()
        .filter(|(_, &d)| d < eta)
        .map(|(i, _)| i)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_box() {
        let g = build_grid(GridSpec::unit_box(2, 3)).unwrap();
        assert_eq!(g.len(), 9);
        assert!((g.spacing() - 0.25).abs() < 1e-15);
        assert!((g.delta()[g.center_node()] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn small_ball_center() {
        let g = build_grid(GridSpec::unit_ball(2, 3)).unwrap();
        assert!((g.delta()[g.center_node()] - 1.0).abs() < 1e-15);
        assert!(g.len() <= 9);
    }

    #[test]
    fn box_3d_counts() {
        let g = build_grid(GridSpec::unit_box(3, 15)).unwrap();
        assert_eq!(g.len(), 3375);
        let min = g.delta().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(build_grid(GridSpec::unit_box(4, 15)).is_err());
        assert!(build_grid(GridSpec::unit_box(1, 15)).is_err());
        assert!(build_grid(GridSpec::unit_box(2, 2)).is_err());
    }

    #[test]
    fn band_edges() {
        let g = build_grid(GridSpec::unit_box(2, 15)).unwrap();
        assert!(boundary_band(&g, g.spacing() / 2.0).unwrap().is_empty());
        assert!(boundary_band(&g, 0.0).is_err());
        assert!(boundary_band(&g, g.diameter() / 2.0).is_err());
        let eps = 1e-9;
        let band = boundary_band(&g, g.diameter() / 2.0 - eps).unwrap();
        let kept = g.delta().iter().filter(|&&d| d >= g.diameter() / 2.0 - eps).count();
        assert_eq!(band.len() + kept, g.len());
    }

    #[test]
    fn midline_ray_distances() {
        let g = build_grid(GridSpec::unit_box(2, 15)).unwrap();
        let ray = g.midline_ray();
        assert_eq!(ray.len(), 8);
        for (k, &node) in ray.iter().enumerate() {
            assert!((g.delta()[node] - (k + 1) as f64 * g.spacing()).abs() < 1e-14);
            assert!((g.coords()[node][1] - 0.5).abs() < 1e-14);
        }
    }
}
