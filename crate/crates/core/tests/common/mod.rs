#![allow(dead_code)]

use std::io::Write;
use std::path::PathBuf;
use std::sync::OnceLock;

use ect_core::experiment::{calibrate, synthesize, CalibrationOutcome, ExperimentConfig, ExperimentData, SolverSpec};
use ect_core::operators::{GradientTransforms, LaplacianSolver};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_path(name)).expect("bundled config loads")
}

/// Calibration cache shared by the integration tests of one build.
pub fn cache_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("ect-cache")
}

pub struct Prepared {
    pub cfg: ExperimentConfig,
    pub cal: CalibrationOutcome,
    pub data: ExperimentData,
    pub lap: LaplacianSolver,
}

impl Prepared {
    pub fn new(name: &str) -> Self {
        let cfg = load(name);
        let cal = calibrate(&cfg, &cache_dir()).expect("calibration");
        let data = synthesize(&cfg, &cal.sensor, &cal.calibration).expect("synthesis");
        let lap = LaplacianSolver::new(&GradientTransforms::new(&cal.sensor.grid)).expect("laplacian");
        Self { cfg, cal, data, lap }
    }

    pub fn solver(&self, label: &str) -> &SolverSpec {
        self.cfg
            .solvers
            .iter()
            .find(|s| s.label() == label)
            .unwrap_or_else(|| panic!("no solver {label}"))
    }
}

pub fn two_bubble() -> &'static Prepared {
    static CELL: OnceLock<Prepared> = OnceLock::new();
    CELL.get_or_init(|| Prepared::new("two_bubble_12e.json"))
}

pub fn arc_disc() -> &'static Prepared {
    static CELL: OnceLock<Prepared> = OnceLock::new();
    CELL.get_or_init(|| Prepared::new("arc_disc_8e.json"))
}

/// Prints one verdict line straight to stderr so it survives output
/// capture, then fails the test when `ok` is false.
pub fn verdict(id: &str, title: &str, ok: bool, detail: &str) {
    let line = format!("{} criterion {id} {title}: {detail}", if ok { "PASS" } else { "FAIL" });
    let _ = writeln!(std::io::stderr().lock(), "{line}");
    assert!(ok, "{line}");
}
