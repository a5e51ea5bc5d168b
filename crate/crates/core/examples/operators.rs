//! Gradient transforms, the Laplacian inverse and the TV step bound.

use ect_core::forward::Sensor;
use ect_core::grid::{ElectrodeLayout, Grid};
use ect_core::operators::{estimate_step_bound, tv_norm, GradientTransforms, LaplacianSolver};
use ndarray::Array1;

fn main() -> ect_core::Result<()> {
    let grid = Grid::new(32, 32, 0.45)?;
    let t = GradientTransforms::new(&grid);
    let (r, d) = (t.right_edges().len(), t.down_edges().len());
    println!("{} ROI pixels, {r} horizontal and {d} vertical differences", t.len());

    // Ramp along columns: constant horizontal gradient, no vertical one.
    let x = Array1::from_iter(grid.roi_pixels().iter().map(|&p| grid.row_col(p).1 as f64));
    let g = t.apply(&x)?;
    println!("ramp: |g1| max {:.1}, |g2| max {:.1}, TV {:.1}", max_abs(&g.g1), max_abs(&g.g2), tv_norm(&t, &x)?);

    let lap = LaplacianSolver::new(&t)?;
    let back = lap.ls_invert(&g.g1, &g.g2)?;
    let err = (&back - &x).mapv(f64::abs).fold(0.0f64, |a, &b| a.max(b));
    println!("(GᵀG)⁻¹Gᵀ(Gx) recovers x within {err:.2e}");

    let sensor = Sensor::new(grid.clone(), ElectrodeLayout::place(&grid, 8, 0.8, 1.0)?, 1.0, 1.0, 3.0)?;
    let cal = sensor.calibrate()?;
    let bound = estimate_step_bound(&cal.sensitivity, &lap)?;
    println!("λmax {:.4e}, step β {:.4e}, converged {}", bound.lambda_max, bound.beta, bound.converged);
    Ok(())
}

fn max_abs(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}
