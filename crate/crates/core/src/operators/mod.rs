//! Discrete gradient transforms, the induced Laplacian and step-size bounds.

mod gradient;
mod laplacian;
mod step;

pub use gradient::{magnitude, tv_norm, weighted_tv_norm, Edge, GradientPair, GradientTransforms};
pub use laplacian::{CsrMatrix, LaplacianSolver, DIRECT_LIMIT};
pub use step::{estimate_step_bound, power_iteration, PowerIteration, StepBound};
