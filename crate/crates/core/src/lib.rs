//! Certified upper bounds on the Lieb-Oxford constant.
//!
//! The pipeline samples an interaction-deficit kernel `Ψ_μν` on a radial grid
//! ([`psi`]), solves the discretized dual problem by a monotone fixed-point
//! iteration ([`dual_solver`]) and turns the resulting feasible vector into a
//! bound on the indirect Coulomb energy. [`optimizer`] searches over smearing
//! measures, [`exchange`] and [`classic_bounds`] provide comparison bounds.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classic_bounds;
pub mod cli;
pub mod dual_solver;
pub mod error;
pub mod exchange;
pub mod measures;
pub mod optimizer;
pub mod psi;
pub mod quadrature;

pub use error::{Error, Result};
