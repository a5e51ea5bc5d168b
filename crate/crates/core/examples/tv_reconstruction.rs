//! TV shrinkage: plain IST against FIST with and without reweighting.

use ect_core::forward::{add_noise, Sensor};
use ect_core::grid::{make_phantom, ElectrodeLayout, Grid, PhantomSpec, Shape};
use ect_core::metrics::{evaluate_against_truth, Polarity};
use ect_core::operators::{GradientTransforms, LaplacianSolver};
use ect_core::tv::{tv_fist, tv_ist, TvConfig, TvProblem};

fn main() -> ect_core::Result<()> {
    let grid = Grid::new(48, 48, 0.45)?;
    let sensor = Sensor::new(grid.clone(), ElectrodeLayout::place(&grid, 12, 0.8, 1.0)?, 1.0, 1.0, 1.5)?;
    let cal = sensor.calibrate()?;
    let spec = PhantomSpec {
        background_eps: 1.0,
        wall_eps: None,
        shapes: vec![Shape::Disc { center: [0.3, 0.1], radius: 0.35, eps: 1.5 }],
    };
    let truth = make_phantom(&grid, &spec, 1.0, 1.5)?;
    let m = add_noise(&sensor.measure(&truth, &cal)?, 35.0, 5);
    let lap = LaplacianSolver::new(&GradientTransforms::new(&grid))?;
    let problem = TvProblem::new(&cal.sensitivity, &lap, &m);

    let base = TvConfig { k_max: 300, alpha_prime: 1e-4, ..Default::default() };
    let ist = tv_ist(&problem, &base)?;
    let fist = tv_fist(&problem, &base)?;
    let rw = tv_fist(&problem, &TvConfig { reweight: true, rho: 0.1, ..base.clone() })?;

    let target = ist.trace.final_cost().unwrap_or(f64::NAN);
    println!("step β = {:.4e}", ist.beta);
    println!(
        "IST reaches cost {target:.4e} after {} iterations, FIST after {:?}",
        base.k_max,
        fist.trace.first_reaching(target)
    );
    for (name, x) in [("ist", &ist.x), ("fist", &fist.x), ("fist+rw", &rw.x)] {
        let r = evaluate_against_truth(x, &truth, &grid, 0.5, Polarity::Bright)?;
        println!("{name:<8} relerr {:.3}  size error {:.3}", r.relative_image_error, r.max_size_error);
    }
    Ok(())
}
