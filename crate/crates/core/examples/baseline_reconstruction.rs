//! LBP, Landweber, ART and SIRT on a two-rod phantom.

use ect_core::baseline::{art, landweber, lbp, sirt, IterParams};
use ect_core::forward::{add_noise, Sensor};
use ect_core::grid::{make_phantom, ElectrodeLayout, Grid, PhantomSpec, Shape};
use ect_core::metrics::{evaluate_against_truth, Polarity};

fn main() -> ect_core::Result<()> {
    let grid = Grid::new(48, 48, 0.45)?;
    let sensor = Sensor::new(grid.clone(), ElectrodeLayout::place(&grid, 12, 0.8, 1.0)?, 1.0, 1.0, 2.0)?;
    let cal = sensor.calibrate()?;
    let spec = PhantomSpec {
        background_eps: 1.0,
        wall_eps: None,
        shapes: vec![
            Shape::Disc { center: [-0.45, 0.2], radius: 0.3, eps: 2.0 },
            Shape::Disc { center: [0.45, -0.2], radius: 0.3, eps: 2.0 },
        ],
    };
    let truth = make_phantom(&grid, &spec, 1.0, 2.0)?;
    let m = add_noise(&sensor.measure(&truth, &cal)?, 40.0, 1);
    let s = &cal.sensitivity;
    let p = IterParams::default();

    let runs = [
        ("lbp", lbp(s, &m)?),
        ("landweber", landweber(s, &m, &p)?),
        ("art", art(s, &m, &p)?),
        ("sirt", sirt(s, &m, &IterParams { relax: 8.0, ..p })?),
    ];
    println!("{:<10} {:>8} {:>8} {:>9}", "solver", "objects", "relerr", "resolved");
    for (name, x) in &runs {
        let r = evaluate_against_truth(x, &truth, &grid, 0.5, Polarity::Bright)?;
        println!(
            "{name:<10} {:>8} {:>8.3} {:>9}",
            r.recon_objects.len(),
            r.relative_image_error,
            r.resolved()
        );
    }
    Ok(())
}
