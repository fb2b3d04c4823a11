//! Verification tools: exponent tables, boundary fits, discrete norms,
//! threshold scans, Green checks and the continuity estimate.

pub mod continuity;
pub mod fit;
pub mod formulas;
pub mod green;
pub mod norms;
pub mod scan;

pub use continuity::{continuity_gap, ContinuityGap};
pub use fit::{
    fit_boundary_exponent, fit_boundary_exponent_with, fit_profile, refinement_exponent, Correction, ExponentFit,
    FitMode, FitOptions, RefinementOptions,
};
pub use formulas::{boundary_prediction, exponent_table, BoundaryPrediction, ExponentTable};
pub use green::{default_sources, green_distance_action, green_kernel_ratios, ActionKind, ActionStats, KernelStats};
pub use norms::{
    admissible_beta, exp_moment, gagliardo_seminorm, h1_power_norm, lebesgue_integral, lebesgue_norm, sobolev_constant,
};
pub use scan::{classify_ladder, sobolev_threshold_scan, ScanClass, ScanEntry, ScanReport};
