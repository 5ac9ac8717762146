//! Sparse FIR estimation with SPARSEVA and finite-sample error bounds.
//!
//! SPARSEVA minimizes `‖θ‖₁` subject to `L(θ) ≤ L(θ̂_NR)(1 + ε_N)`, where
//! `L(θ) = ‖Y − Φᵀθ‖² / (2N)` and `θ̂_NR` is the least-squares estimate. The crate
//! provides the solver, the χ²-based high-probability bounds on its estimation
//! error, the Monte Carlo curvature estimate those bounds need, and a synthetic
//! system-identification harness for checking them.

// `!(x > 0.0)` is used on purpose throughout: it rejects NaN along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod bounds;
pub mod curvature;
pub mod dataio;
pub mod error;
pub mod experiment;
pub mod problem;
pub mod solver;
pub mod stats;
pub mod sysid;

pub use bounds::{general_bound, sparse_bound, BoundResult, GeneralBoundInputs, SparseBoundInputs};
pub use curvature::{estimate_kappa_alpha, CurvatureEstimate};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentRecord};
pub use problem::*;
pub use solver::{lagrange_multiplier, least_squares, solve_sparseva};
pub use sysid::InputKind;
