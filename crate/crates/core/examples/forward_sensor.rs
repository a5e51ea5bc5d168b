//! Calibrate an 8-electrode sensor, then measure a single off-centre rod.

use ect_core::forward::Sensor;
use ect_core::grid::{make_phantom, ElectrodeLayout, Grid, PhantomSpec, Shape};

fn main() -> ect_core::Result<()> {
    let grid = Grid::new(48, 48, 0.45)?;
    let layout = ElectrodeLayout::place(&grid, 8, 0.8, 1.0)?;
    let sensor = Sensor::new(grid.clone(), layout, 1.0, 1.0, 3.0)?;
    let cal = sensor.calibrate()?;

    println!("pairs: {}", cal.c_empty.len());
    for (k, (i, j)) in cal.c_empty.pairs.iter().enumerate().take(7) {
        println!(
            "  C[{}-{}]  empty {:.4e}  full {:.4e}  F/m",
            i + 1,
            j + 1,
            cal.c_empty.c[k],
            cal.c_full.c[k]
        );
    }

    let spec = PhantomSpec {
        background_eps: 1.0,
        wall_eps: None,
        shapes: vec![Shape::Disc { center: [0.4, 0.0], radius: 0.25, eps: 3.0 }],
    };
    let rod = make_phantom(&grid, &spec, 1.0, 3.0)?;
    let m = sensor.measure(&rod, &cal)?;
    // The linearized prediction from the sensitivity rows.
    let x = rod.normalized(&grid);
    let linear = cal.sensitivity.s.dot(&x);
    println!("normalized measurements (FDM vs linear):");
    for (k, (i, j)) in cal.sensitivity.pairs.iter().enumerate().take(7) {
        println!("  {}-{}  {:.4}  {:.4}", i + 1, j + 1, m.lambda[k], linear[k]);
    }
    Ok(())
}
