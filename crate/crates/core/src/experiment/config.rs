use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseline::IterParams;
use crate::error::{EctError, Result};
use crate::forward::{Sensor, SorParams};
use crate::grid::{ElectrodeLayout, Grid, PhantomSpec};
use crate::metrics::Polarity;
use crate::tv::TvConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    #[serde(default = "default_roi")]
    pub roi_radius_frac: f64,
    /// Pixel size in metres; `None` keeps the grid default.
    #[serde(default)]
    pub pitch: Option<f64>,
}

fn default_roi() -> f64 {
    0.45
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeSpec {
    pub count: usize,
    #[serde(default = "default_coverage")]
    pub coverage_frac: f64,
    #[serde(default = "default_vc")]
    pub v_c: f64,
}

fn default_coverage() -> f64 {
    0.8
}

fn default_vc() -> f64 {
    1.0
}

/// Calibration states and the wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PermittivitySpec {
    /// Maps to normalized intensity 0.
    pub empty: f64,
    /// Maps to normalized intensity 1.
    pub full: f64,
    pub wall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub polarity: Polarity,
}

fn default_threshold() -> f64 {
    0.5
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self {
            threshold: default_threshold(),
            polarity: Polarity::Bright,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverSpec {
    Lbp {
        #[serde(default)]
        label: Option<String>,
    },
    Landweber {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        params: IterParams,
    },
    Art {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        params: IterParams,
    },
    Sirt {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        params: IterParams,
    },
    TvIst {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        params: TvConfig,
    },
    TvFist {
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        params: TvConfig,
    },
}

impl SolverSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            SolverSpec::Lbp { .. } => "lbp",
            SolverSpec::Landweber { .. } => "landweber",
            SolverSpec::Art { .. } => "art",
            SolverSpec::Sirt { .. } => "sirt",
            SolverSpec::TvIst { .. } => "tv_ist",
            SolverSpec::TvFist { .. } => "tv_fist",
        }
    }

    /// Output directory name; the kind when no label is given.
    pub fn label(&self) -> &str {
        let l = match self {
            SolverSpec::Lbp { label }
            | SolverSpec::Landweber { label, .. }
            | SolverSpec::Art { label, .. }
            | SolverSpec::Sirt { label, .. }
            | SolverSpec::TvIst { label, .. }
            | SolverSpec::TvFist { label, .. } => label,
        };
        l.as_deref().unwrap_or(self.kind())
    }

    fn validate(&self) -> Result<()> {
        let label = self.label();
        let ok = !label.is_empty()
            && label
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
            && label != "."
            && label != "..";
        if !ok {
            return Err(EctError::Config(format!(
                "solver label {label:?} must be non-empty and use only [A-Za-z0-9_.-]"
            )));
        }
        match self {
            SolverSpec::TvIst { params, .. } | SolverSpec::TvFist { params, .. } => params.validate(),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub grid: GridSpec,
    pub electrodes: ElectrodeSpec,
    pub permittivity: PermittivitySpec,
    #[serde(default)]
    pub sor: SorParams,
    pub phantom: PhantomSpec,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    pub solvers: Vec<SolverSpec>,
    #[serde(default)]
    pub metrics: MetricsSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses and validates. Parse errors carry serde's line/column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| EctError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            EctError::Config(msg) => EctError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(EctError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.solvers.is_empty() {
            return Err(EctError::Config("solvers: at least one solver is required".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (i, s) in self.solvers.iter().enumerate() {
            s.validate().map_err(|e| EctError::Config(format!("solvers[{i}]: {e}")))?;
            if !seen.insert(s.label()) {
                return Err(EctError::Config(format!("solvers[{i}]: duplicate label {:?}", s.label())));
            }
        }
        if let Some(n) = &self.noise {
            if let Some(snr) = n.snr_db {
                if !snr.is_finite() {
                    return Err(EctError::Config("noise.snr_db must be finite (omit it for noiseless)".into()));
                }
                if n.seed.is_none() {
                    return Err(EctError::Config("noise.seed is required when snr_db is set".into()));
                }
            }
        }
        let m = &self.metrics;
        if !(m.threshold > 0.0 && m.threshold < 1.0) {
            return Err(EctError::Config(format!("metrics.threshold must lie in (0, 1), got {}", m.threshold)));
        }
        let p = &self.permittivity;
        if !(p.empty > 0.0 && p.full > 0.0 && p.wall > 0.0) || p.empty == p.full {
            return Err(EctError::Config(
                "permittivity: empty, full and wall must be positive with empty != full".into(),
            ));
        }
        self.sor.validate()?;
        // Builds the geometry and rasterizes the phantom once to surface
        // shape errors up front.
        let sensor = self.sensor()?;
        crate::grid::make_phantom(&sensor.grid, &self.phantom, p.empty, p.full)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        match g.pitch {
            Some(pitch) => Grid::with_pitch(g.n1, g.n2, g.roi_radius_frac, pitch),
            None => Grid::new(g.n1, g.n2, g.roi_radius_frac),
        }
    }

    pub fn sensor(&self) -> Result<Sensor> {
        let grid = self.grid()?;
        let e = &self.electrodes;
        let layout = ElectrodeLayout::place(&grid, e.count, e.coverage_frac, e.v_c)?;
        let p = &self.permittivity;
        Ok(Sensor::new(grid, layout, p.wall, p.empty, p.full)?.with_sor(self.sor))
    }

    /// Keeps only the named solvers, in config order.
    pub fn select_solvers(&mut self, labels: &[String]) -> Result<()> {
        for l in labels {
            if !self.solvers.iter().any(|s| s.label() == l) {
                let known: Vec<&str> = self.solvers.iter().map(|s| s.label()).collect();
                return Err(EctError::Config(format!("unknown solver {l:?}; config has {known:?}")));
            }
        }
        self.solvers.retain(|s| labels.iter().any(|l| l == s.label()));
        Ok(())
    }
}
