//! Numerical laboratory for a compressible two-fluid model with capillarity.
//!
//! - [`closure`]: pressure-equilibrium closure and coefficient functions.
//! - [`spectral`]: per-frequency Green matrix, spectrum, semigroup and filters.
//! - [`linearlab`]: exact linear evolution in frequency space, radial norms, rate fits.
//! - [`solver`]: pseudo-spectral nonlinear integrator on a periodic box.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod closure;
pub mod error;
pub mod linearlab;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
