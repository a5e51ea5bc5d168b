//! Total-variation reconstruction by iterative shrinkage in the gradient
//! domain, with optional reweighting and sensitivity correction.

mod shrink;
mod solver;

pub use shrink::{shrink, shrink_2d, soft_threshold, update_weights, weighted_shrink_2d};
pub use solver::{
    adaptive_sensitivity, fitting_curve_sensitivity, momentum_next, tv_fist, tv_gradient_step, tv_ist, NonlinearMode,
    SolverTrace, TraceRecord, TvConfig, TvProblem, TvResult,
};
