//! The bundled two-bubble experiment: every solver, written to disk.
//!
//! `cargo run --release --example two_bubble -- [out_dir]`

use std::path::PathBuf;

use ect_core::experiment::{run_experiment, ExperimentConfig, RunOptions};

fn main() -> ect_core::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "out/two_bubble".into());
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/two_bubble_12e.json");
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let summary = run_experiment(&cfg, &RunOptions { out_dir: Some(out), cache_dir: None })?;
    for s in &summary.manifest.solvers {
        let metrics = std::fs::read_to_string(summary.out_dir.join(&s.label).join("metrics.json"));
        let v: serde_json::Value = match metrics {
            Ok(t) => serde_json::from_str(&t)?,
            Err(_) => {
                println!("{:<14} failed: {:?}", s.label, s.error);
                continue;
            }
        };
        let e = &v["evaluation"];
        println!(
            "{:<14} merged {:<5} size error {:.3}",
            s.label,
            e["merged"].as_bool().unwrap_or(false),
            e["max_size_error"].as_f64().unwrap_or(f64::NAN)
        );
    }
    println!("written to {}", summary.out_dir.display());
    Ok(())
}
