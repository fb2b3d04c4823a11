//! Numerical toolkit for the mixed local-nonlocal operator `−Δ + (−Δ)^s`
//! with a zero exterior condition and singular right-hand sides `f/u^γ`.
//!
//! The crate discretizes the unit box or ball on a uniform lattice,
//! assembles the operator, solves linear and regularized nonlinear
//! problems by monotone continuation, and provides the analysis tools
//! used to check boundary behaviour, regularity thresholds and Green
//! function bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod grid;
pub mod linsolve;
pub mod operator;
pub mod quadrature;
pub mod singular;
pub mod vecops;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{boundary_band, build_grid, Grid, GridSpec, Shape};
pub use operator::{normalizing_constant, MixedOperator};
