//! Two-dimensional electrical capacitance tomography (ECT).
//!
//! The crate covers the whole simulated measurement chain and the
//! reconstruction side:
//!
//! * [`grid`] builds the pixel lattice, the circular imaging region, the
//!   electrode ring and rasterized phantoms.
//! * [`forward`] solves the electrostatic problem with a finite-difference
//!   SOR solver and derives capacitances, normalized measurements and
//!   sensitivity maps.
//! * [`operators`] holds the discrete gradient transforms, the Laplacian
//!   least-squares inverse and step-size estimation.
//! * [`baseline`] implements LBP, Landweber, ART and SIRT.
//! * [`tv`] implements total-variation iterative shrinkage (IST and the
//!   accelerated FIST variant) with adaptive reweighting and non-linear
//!   sensitivity correction.
//! * [`metrics`] scores reconstructions against ground truth.
//! * [`experiment`] drives complete experiments from a JSON config.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod csv;
pub mod error;
pub mod experiment;
pub mod forward;
pub mod grid;
pub mod metrics;
pub mod operators;
pub mod tv;

pub use error::{EctError, Result};
