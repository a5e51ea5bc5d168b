//! Arc and disc phantom: Landweber against reweighted TV.

use ect_core::experiment::{calibrate, default_cache_dir, run_solver, synthesize, ExperimentConfig};
use ect_core::metrics::evaluate_against_truth;
use ect_core::operators::{GradientTransforms, LaplacianSolver};

fn main() -> ect_core::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/arc_disc_8e.json");
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let cal = calibrate(&cfg, &default_cache_dir())?;
    let grid = &cal.sensor.grid;
    let data = synthesize(&cfg, &cal.sensor, &cal.calibration)?;
    let lap = LaplacianSolver::new(&GradientTransforms::new(grid))?;

    for spec in &cfg.solvers {
        let run = run_solver(spec, &cal.sensor, &cal.calibration, Some(&lap), &data.measurement)?;
        let r = evaluate_against_truth(&run.x, &data.truth, grid, cfg.metrics.threshold, cfg.metrics.polarity)?;
        let intensity: Vec<String> = r
            .matches
            .iter()
            .map(|m| m.recon_mean_intensity.map_or("-".into(), |v| format!("{v:.2}")))
            .collect();
        println!(
            "{:<11} relerr {:.3}  objects {}  intensity {}",
            spec.label(),
            r.relative_image_error,
            r.recon_objects.len(),
            intensity.join("/")
        );
    }
    Ok(())
}
