//! End-to-end experiments driven by a JSON config: calibration (cached),
//! phantom and measurement synthesis, solver runs and file output.
//!
//! Output layout under the experiment directory:
//!
//! ```text
//! config.json            resolved config
//! phantom.csv / .pgm     normalized ground truth
//! measurement.csv        normalized (possibly noisy) measurements
//! sensitivity.json       shape, pairs and checksum of the sensitivity matrix
//! <label>/image.csv      reconstruction, full lattice
//! <label>/image.pgm
//! <label>/trace.csv      TV solvers only
//! <label>/metrics.json
//! manifest.json          solver outcomes and sha256 of every other file
//! ```

mod config;
mod output;

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array1;
use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    ElectrodeSpec, ExperimentConfig, GridSpec, MetricsSpec, NoiseSpec, PermittivitySpec, SolverSpec, CONFIG_VERSION,
};
pub use output::{file_entries, pgm_bytes, sha256_hex, FileEntry, Manifest, SolverOutcome, MANIFEST_FILE};

use crate::baseline::{art, landweber, lbp, sirt};
use crate::csv;
use crate::error::{EctError, Result};
use crate::forward::{add_noise, Calibration, MeasurementVector, Sensor, SorParams};
use crate::grid::{make_phantom, Grid, PermittivityField};
use crate::metrics::{evaluate_against_truth, EvaluationReport};
use crate::operators::{GradientTransforms, LaplacianSolver};
use crate::tv::{tv_fist, tv_ist, NonlinearMode, SolverTrace, TvProblem};

/// Environment variable naming the calibration cache directory.
pub const CACHE_ENV: &str = "ECT_CACHE_DIR";
const CACHE_FORMAT: u32 = 1;

/// `$ECT_CACHE_DIR`, or `.ect-cache` in the working directory.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".ect-cache"))
}

#[derive(Serialize)]
struct GeometryKey<'a> {
    format: u32,
    grid: &'a GridSpec,
    electrodes: &'a ElectrodeSpec,
    permittivity: &'a PermittivitySpec,
    sor: &'a SorParams,
}

/// Content hash of everything that determines the calibration.
pub fn geometry_hash(cfg: &ExperimentConfig) -> String {
    let key = GeometryKey {
        format: CACHE_FORMAT,
        grid: &cfg.grid,
        electrodes: &cfg.electrodes,
        permittivity: &cfg.permittivity,
        sor: &cfg.sor,
    };
    sha256_hex(&serde_json::to_vec(&key).expect("plain data serializes"))
}

pub struct CalibrationOutcome {
    pub sensor: Sensor,
    pub calibration: Calibration,
    pub hash: String,
    /// Directory holding `c_empty.csv`, `c_full.csv` and `sensitivity.csv`.
    pub dir: PathBuf,
    pub cache_hit: bool,
}

fn read_cached(dir: &Path, sensor: &Sensor) -> Result<Calibration> {
    let mut sensitivity = csv::read_sensitivity(&dir.join("sensitivity.csv"))?;
    sensitivity.base = Some(sensor.empty_field());
    let cal = Calibration {
        c_empty: csv::read_capacitance(&dir.join("c_empty.csv"))?,
        c_full: csv::read_capacitance(&dir.join("c_full.csv"))?,
        sensitivity,
    };
    let (m, n) = (sensor.layout.n_pairs(), sensor.grid.roi_len());
    if cal.c_empty.len() != m || cal.c_full.len() != m || cal.sensitivity.s.dim() != (m, n) {
        return Err(EctError::Calibration(format!("cached calibration in {} has wrong shape", dir.display())));
    }
    Ok(cal)
}

/// Calibrates the sensor described by `cfg`, reusing `cache_root/<hash>` when
/// present. Fresh results are written to the cache and read back, so a hit
/// and a miss yield bit-identical calibrations.
pub fn calibrate(cfg: &ExperimentConfig, cache_root: &Path) -> Result<CalibrationOutcome> {
    let sensor = cfg.sensor()?;
    let hash = geometry_hash(cfg);
    let dir = cache_root.join(&hash);
    if dir.is_dir() {
        match read_cached(&dir, &sensor) {
            Ok(calibration) => {
                log::info!("calibration cache hit {}", dir.display());
                return Ok(CalibrationOutcome { sensor, calibration, hash, dir, cache_hit: true });
            }
            Err(e) => log::warn!("ignoring unreadable cache entry {}: {e}", dir.display()),
        }
    }
    log::info!("calibrating {} electrodes on {}x{}", cfg.electrodes.count, cfg.grid.n1, cfg.grid.n2);
    let cal = sensor.calibrate()?;
    fs::create_dir_all(cache_root)?;
    let tmp = cache_root.join(format!(".{hash}.{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;
    csv::write_capacitance(&tmp.join("c_empty.csv"), &cal.c_empty)?;
    csv::write_capacitance(&tmp.join("c_full.csv"), &cal.c_full)?;
    csv::write_sensitivity(&tmp.join("sensitivity.csv"), &cal.sensitivity)?;
    let key = serde_json::json!({
        "grid": cfg.grid, "electrodes": cfg.electrodes, "permittivity": cfg.permittivity, "sor": cfg.sor,
    });
    fs::write(tmp.join("geometry.json"), serde_json::to_string_pretty(&key)?)?;
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    if fs::rename(&tmp, &dir).is_err() {
        // Another process won the race; its entry is equivalent.
        let _ = fs::remove_dir_all(&tmp);
    }
    let calibration = read_cached(&dir, &sensor)?;
    Ok(CalibrationOutcome { sensor, calibration, hash, dir, cache_hit: false })
}

/// Ground truth and measurements shared by every solver of a run.
pub struct ExperimentData {
    pub truth: PermittivityField,
    pub measurement: MeasurementVector,
}

pub fn synthesize(cfg: &ExperimentConfig, sensor: &Sensor, cal: &Calibration) -> Result<ExperimentData> {
    let p = &cfg.permittivity;
    let truth = make_phantom(&sensor.grid, &cfg.phantom, p.empty, p.full)?;
    let mut measurement = sensor.measure(&truth, cal)?;
    if let Some(NoiseSpec { snr_db: Some(snr), seed }) = cfg.noise {
        let seed = seed.ok_or_else(|| EctError::Config("noise.seed is required when snr_db is set".into()))?;
        measurement = add_noise(&measurement, snr, seed);
    }
    Ok(ExperimentData { truth, measurement })
}

/// One solver's result.
#[derive(Debug, Clone)]
pub struct SolverRun {
    pub x: Array1<f64>,
    pub trace: Option<SolverTrace>,
    pub beta: Option<f64>,
}

/// Runs a single solver on shared inputs. TV solvers need `lap`.
pub fn run_solver(
    spec: &SolverSpec,
    sensor: &Sensor,
    cal: &Calibration,
    lap: Option<&LaplacianSolver>,
    m: &MeasurementVector,
) -> Result<SolverRun> {
    let s = &cal.sensitivity;
    let plain = |x| SolverRun { x, trace: None, beta: None };
    match spec {
        SolverSpec::Lbp { .. } => lbp(s, m).map(plain),
        SolverSpec::Landweber { params, .. } => landweber(s, m, params).map(plain),
        SolverSpec::Art { params, .. } => art(s, m, params).map(plain),
        SolverSpec::Sirt { params, .. } => sirt(s, m, params).map(plain),
        SolverSpec::TvIst { params, .. } | SolverSpec::TvFist { params, .. } => {
            let lap = lap.ok_or_else(|| EctError::State("TV solver needs the Laplacian inverse".into()))?;
            let mut problem = TvProblem::new(s, lap, m);
            if params.nonlinear == NonlinearMode::AdaptiveFdm {
                problem = problem.with_adaptive(sensor, cal);
            }
            let r = if matches!(spec, SolverSpec::TvIst { .. }) {
                tv_ist(&problem, params)?
            } else {
                tv_fist(&problem, params)?
            };
            Ok(SolverRun { x: r.x, trace: Some(r.trace), beta: Some(r.beta) })
        }
    }
}

#[derive(Serialize)]
struct SolverMetrics<'a> {
    label: &'a str,
    kind: &'a str,
    beta: Option<f64>,
    final_cost: Option<f64>,
    iterations: Option<usize>,
    evaluation: &'a EvaluationReport,
}

/// Writes `<label>/…` under `root`; returns the written paths relative to
/// `root`.
fn write_solver_outputs(
    root: &Path,
    spec: &SolverSpec,
    run: &SolverRun,
    grid: &Grid,
    data: &ExperimentData,
    metrics: &MetricsSpec,
) -> Result<Vec<String>> {
    let dir = root.join(spec.label());
    fs::create_dir_all(&dir)?;
    let mut names = vec!["image.csv", "image.pgm", "metrics.json"];
    let img = grid.to_image(&run.x)?;
    fs::write(dir.join("image.csv"), csv::image_to_string(&img))?;
    fs::write(dir.join("image.pgm"), pgm_bytes(&img))?;
    if let Some(t) = &run.trace {
        fs::write(dir.join("trace.csv"), t.to_csv())?;
        names.push("trace.csv");
    }
    let evaluation = evaluate_against_truth(&run.x, &data.truth, grid, metrics.threshold, metrics.polarity)?;
    let report = SolverMetrics {
        label: spec.label(),
        kind: spec.kind(),
        beta: run.beta,
        final_cost: run.trace.as_ref().and_then(SolverTrace::final_cost),
        iterations: run.trace.as_ref().map(|t| t.records.len().saturating_sub(1)),
        evaluation: &evaluation,
    };
    fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    names.sort_unstable();
    Ok(names.into_iter().map(|n| format!("{}/{n}", spec.label())).collect())
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config's `output_dir`.
    pub out_dir: Option<PathBuf>,
    /// Calibration cache; [`default_cache_dir`] when `None`.
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

impl RunSummary {
    pub fn all_ok(&self) -> bool {
        self.manifest.all_ok()
    }
}

/// Runs every solver of `cfg` (in parallel) and writes the output tree.
/// A failing solver is recorded in the manifest; the others still run.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| EctError::Config("no output directory (set output_dir or pass --out)".into()))?;
    let cache = opts.cache_dir.clone().unwrap_or_else(default_cache_dir);
    let cal = calibrate(cfg, &cache)?;
    let grid = &cal.sensor.grid;
    let data = synthesize(cfg, &cal.sensor, &cal.calibration)?;

    fs::create_dir_all(&out_dir)?;
    let shared: Vec<String> = ["config.json", "phantom.csv", "phantom.pgm", "measurement.csv", "sensitivity.json"]
        .map(String::from)
        .to_vec();
    fs::write(out_dir.join("config.json"), serde_json::to_string_pretty(cfg)? + "\n")?;
    let truth_x = data.truth.normalized(grid);
    let truth_img = grid.to_image(&truth_x)?;
    fs::write(out_dir.join("phantom.csv"), csv::image_to_string(&truth_img))?;
    fs::write(out_dir.join("phantom.pgm"), pgm_bytes(&truth_img))?;
    let pairs = cal.sensor.layout.pairs();
    csv::write_measurement(&out_dir.join("measurement.csv"), &data.measurement, &pairs)?;
    let s = &cal.calibration.sensitivity;
    let sens_meta = serde_json::json!({
        "rows": s.n_rows(),
        "cols": s.n_cols(),
        "pairs": pairs.iter().map(|&(i, j)| format!("{}-{}", i + 1, j + 1)).collect::<Vec<_>>(),
        "frobenius_norm": s.s.iter().map(|v| v * v).sum::<f64>().sqrt(),
        "geometry_hash": cal.hash,
        "sha256": sha256_hex(csv::sensitivity_to_string(s).as_bytes()),
    });
    fs::write(out_dir.join("sensitivity.json"), serde_json::to_string_pretty(&sens_meta)? + "\n")?;

    let needs_tv = cfg
        .solvers
        .iter()
        .any(|s| matches!(s, SolverSpec::TvIst { .. } | SolverSpec::TvFist { .. }));
    let lap = if needs_tv {
        Some(LaplacianSolver::new(&GradientTransforms::new(grid))?)
    } else {
        None
    };

    let results: Vec<(SolverOutcome, Vec<String>)> = cfg
        .solvers
        .par_iter()
        .map(|spec| {
            let start = std::time::Instant::now();
            let dir = out_dir.join(spec.label());
            let cleared = if dir.exists() { fs::remove_dir_all(&dir).map_err(EctError::from) } else { Ok(()) };
            let result = cleared
                .and_then(|()| run_solver(spec, &cal.sensor, &cal.calibration, lap.as_ref(), &data.measurement))
                .and_then(|run| write_solver_outputs(&out_dir, spec, &run, grid, &data, &cfg.metrics));
            log::info!("{} finished in {:.2?}", spec.label(), start.elapsed());
            let (files, error) = match result {
                Ok(files) => (files, None),
                Err(e) => {
                    log::error!("{} failed: {e}", spec.label());
                    (Vec::new(), Some(e.to_string()))
                }
            };
            let outcome = SolverOutcome {
                label: spec.label().to_string(),
                kind: spec.kind().to_string(),
                ok: error.is_none(),
                error,
            };
            (outcome, files)
        })
        .collect();
    let mut produced = shared;
    let mut outcomes = Vec::new();
    for (o, files) in results {
        outcomes.push(o);
        produced.extend(files);
    }

    let manifest = Manifest {
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        name: cfg.name.clone(),
        geometry_hash: cal.hash.clone(),
        cache_hit: cal.cache_hit,
        solvers: outcomes,
        files: file_entries(&out_dir, &produced)?,
    };
    fs::write(out_dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(RunSummary { out_dir, manifest })
}
