use std::fmt::Write as _;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::shrink::{shrink_2d, update_weights, weighted_shrink_2d};
use crate::error::{check_len, EctError, Result};
use crate::forward::{Calibration, MeasurementVector, SensitivityMatrix, Sensor};
use crate::operators::{estimate_step_bound, GradientPair, LaplacianSolver};

/// Sensitivity correction applied during TV reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearMode {
    #[default]
    None,
    /// Rows rescaled once by `2ε/(Δε + 2ε)`.
    FittingCurve,
    /// Sensitivity rebuilt from fresh potential solves every `v` iterations.
    AdaptiveFdm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvConfig {
    pub k_max: usize,
    /// Gradient step; `None` uses [`estimate_step_bound`].
    pub beta: Option<f64>,
    /// Shrinkage threshold.
    pub alpha_prime: f64,
    pub rho: f64,
    /// Weight (and adaptive sensitivity) update period.
    pub v: usize,
    pub reweight: bool,
    /// FIST only; `false` forces the momentum coefficient to zero.
    pub momentum: bool,
    /// Project each image onto `[0, 1]`.
    pub box_constraint: bool,
    pub nonlinear: NonlinearMode,
    pub delta_eps: f64,
    pub eps_ref: f64,
}

impl Default for TvConfig {
    fn default() -> Self {
        Self {
            k_max: 500,
            beta: None,
            alpha_prime: 1e-3,
            rho: 0.05,
            v: 25,
            reweight: false,
            momentum: true,
            box_constraint: true,
            nonlinear: NonlinearMode::None,
            delta_eps: 0.0,
            eps_ref: 1.0,
        }
    }
}

impl TvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(EctError::Config("k_max must be at least 1".into()));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(EctError::Config(format!("beta must be positive, got {b}")));
            }
        }
        if !(self.alpha_prime >= 0.0 && self.alpha_prime.is_finite()) {
            return Err(EctError::Config(format!("alpha_prime must be >= 0, got {}", self.alpha_prime)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(EctError::Config(format!("rho must be positive, got {}", self.rho)));
        }
        if self.v == 0 {
            return Err(EctError::Config("weight period v must be at least 1".into()));
        }
        Ok(())
    }
}

/// Inputs of a TV reconstruction. `adaptive` is required for
/// [`NonlinearMode::AdaptiveFdm`].
#[derive(Clone, Copy)]
pub struct TvProblem<'a> {
    pub s: &'a SensitivityMatrix,
    pub lap: &'a LaplacianSolver,
    pub m: &'a MeasurementVector,
    pub adaptive: Option<(&'a Sensor, &'a Calibration)>,
}

impl<'a> TvProblem<'a> {
    pub fn new(s: &'a SensitivityMatrix, lap: &'a LaplacianSolver, m: &'a MeasurementVector) -> Self {
        Self { s, lap, m, adaptive: None }
    }

    pub fn with_adaptive(mut self, sensor: &'a Sensor, calib: &'a Calibration) -> Self {
        self.adaptive = Some((sensor, calib));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    /// `½‖Sx - λ‖² + (α′/β)·TV(x)`.
    pub cost: f64,
    pub residual: f64,
    pub tv: f64,
    pub weighted_tv: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
}

impl SolverTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,cost,residual,tv,weighted_tv\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:.14e},{:.14e},{:.14e},{:.14e}",
                r.k, r.cost, r.residual, r.tv, r.weighted_tv
            );
        }
        out
    }

    pub fn final_cost(&self) -> Option<f64> {
        self.records.last().map(|r| r.cost)
    }

    /// First iteration whose cost is at or below `level`.
    pub fn first_reaching(&self, level: f64) -> Option<usize> {
        self.records.iter().find(|r| r.cost <= level).map(|r| r.k)
    }
}

#[derive(Debug, Clone)]
pub struct TvResult {
    pub x: Array1<f64>,
    pub trace: SolverTrace,
    pub beta: f64,
}

/// Rescales every row by `2ε/(Δε + 2ε)`.
pub fn fitting_curve_sensitivity(s: &SensitivityMatrix, eps_ref: f64, delta_eps: f64) -> Result<SensitivityMatrix> {
    let den = delta_eps + 2.0 * eps_ref;
    if !(den.abs() > 1e-12 * (delta_eps.abs() + eps_ref.abs()).max(1e-300)) || !den.is_finite() {
        return Err(EctError::Config(format!(
            "fitting curve undefined for eps_ref = {eps_ref}, delta_eps = {delta_eps}"
        )));
    }
    Ok(s.scaled(2.0 * eps_ref / den))
}

/// Sensitivity rebuilt from potentials at the permittivity implied by `x`.
pub fn adaptive_sensitivity(x: &Array1<f64>, sensor: &Sensor, calib: &Calibration) -> Result<SensitivityMatrix> {
    sensor.adaptive_sensitivity(x, calib)
}

/// Data-term gradient in the gradient domain:
/// `∇_i = G_i L⁻¹ Sᵀ(Sx - λ)` for `i = 1, 2`.
pub fn tv_gradient_step(
    s: &SensitivityMatrix,
    lap: &LaplacianSolver,
    x: &Array1<f64>,
    m: &MeasurementVector,
) -> Result<(Array1<f64>, Array1<f64>)> {
    check_len(s.n_cols(), x.len())?;
    check_len(s.n_rows(), m.len())?;
    let r = s.s.dot(x) - &m.lambda;
    let z = lap.solve(&s.s.t().dot(&r))?;
    let t = lap.transforms();
    Ok((t.g1(&z)?, t.g2(&z)?))
}

struct Ctx<'a> {
    lap: &'a LaplacianSolver,
    m: &'a MeasurementVector,
    s: SensitivityMatrix,
    beta: f64,
    cfg: &'a TvConfig,
    adaptive: Option<(&'a Sensor, &'a Calibration)>,
}

impl<'a> Ctx<'a> {
    fn new(p: &TvProblem<'a>, cfg: &'a TvConfig) -> Result<Self> {
        cfg.validate()?;
        check_len(p.s.n_rows(), p.m.len())?;
        check_len(p.lap.len(), p.s.n_cols())?;
        if cfg.nonlinear == NonlinearMode::AdaptiveFdm && p.adaptive.is_none() {
            return Err(EctError::Config("adaptive sensitivity needs a sensor and calibration".into()));
        }
        let s = match cfg.nonlinear {
            NonlinearMode::FittingCurve => fitting_curve_sensitivity(p.s, cfg.eps_ref, cfg.delta_eps)?,
            _ => p.s.clone(),
        };
        let beta = match cfg.beta {
            Some(b) => b,
            None => estimate_step_bound(&s, p.lap)?.beta,
        };
        Ok(Self {
            lap: p.lap,
            m: p.m,
            s,
            beta,
            cfg,
            adaptive: p.adaptive,
        })
    }

    /// Periodic weight refresh and adaptive sensitivity rebuild at the start
    /// of iteration `k`.
    fn refresh(&mut self, k: usize, x: &Array1<f64>, g: &GradientPair, w: &mut Option<Array1<f64>>) -> Result<()> {
        if !k.is_multiple_of(self.cfg.v) {
            return Ok(());
        }
        if self.cfg.reweight {
            *w = Some(update_weights(&g.g, self.cfg.rho)?);
        }
        if k > 0 && self.cfg.nonlinear == NonlinearMode::AdaptiveFdm {
            let (sensor, calib) = self.adaptive.expect("checked in new");
            self.s = sensor.adaptive_sensitivity(x, calib)?;
            if self.cfg.beta.is_none() {
                self.beta = self.beta.min(estimate_step_bound(&self.s, self.lap)?.beta);
            }
        }
        Ok(())
    }

    /// Gradient step at `y`, shrinkage of `h - β∇`, LS image and its gradients.
    fn step(
        &self,
        k: usize,
        y: &Array1<f64>,
        h1: &Array1<f64>,
        h2: &Array1<f64>,
        w: Option<&Array1<f64>>,
    ) -> Result<(Array1<f64>, GradientPair)> {
        let (d1, d2) = tv_gradient_step(&self.s, self.lap, y, self.m)?;
        let gh1 = h1 - &(&d1 * self.beta);
        let gh2 = h2 - &(&d2 * self.beta);
        let (g1, g2) = match w {
            Some(w) => weighted_shrink_2d(&gh1, &gh2, w, self.cfg.alpha_prime)?,
            None => shrink_2d(&gh1, &gh2, self.cfg.alpha_prime)?,
        };
        let mut x = self.lap.ls_invert(&g1, &g2)?;
        if self.cfg.box_constraint {
            x.mapv_inplace(|v| v.clamp(0.0, 1.0));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(EctError::Numerical {
                iteration: k + 1,
                reason: "non-finite image".into(),
            });
        }
        let g = self.lap.transforms().apply(&x)?;
        Ok((x, g))
    }

    fn record(&self, k: usize, x: &Array1<f64>, g: &GradientPair, w: Option<&Array1<f64>>) -> Result<TraceRecord> {
        let r = self.s.s.dot(x) - &self.m.lambda;
        let res2 = r.dot(&r);
        let tv = g.g.sum();
        let weighted_tv = w.map_or(tv, |w| g.g.dot(w));
        let cost = 0.5 * res2 + self.cfg.alpha_prime / self.beta * tv;
        if !cost.is_finite() {
            return Err(EctError::Numerical {
                iteration: k,
                reason: "non-finite objective".into(),
            });
        }
        Ok(TraceRecord {
            k,
            cost,
            residual: res2.sqrt(),
            tv,
            weighted_tv,
        })
    }
}

fn zero_state(n: usize) -> (Array1<f64>, GradientPair) {
    let z = Array1::zeros(n);
    (z.clone(), GradientPair::from_components(z.clone(), z))
}

/// TV iterative shrinkage, starting from zero gradients.
pub fn tv_ist(problem: &TvProblem, cfg: &TvConfig) -> Result<TvResult> {
    let mut ctx = Ctx::new(problem, cfg)?;
    let (mut x, mut g) = zero_state(problem.lap.len());
    let mut w = None;
    let mut trace = SolverTrace::default();
    trace.records.push(ctx.record(0, &x, &g, w.as_ref())?);
    for k in 0..cfg.k_max {
        ctx.refresh(k, &x, &g, &mut w)?;
        let (xn, gn) = ctx.step(k, &x, &g.g1, &g.g2, w.as_ref())?;
        x = xn;
        g = gn;
        trace.records.push(ctx.record(k + 1, &x, &g, w.as_ref())?);
    }
    Ok(TvResult { x, trace, beta: ctx.beta })
}

/// Accelerated TV shrinkage with auxiliary gradients and the momentum
/// sequence `t_{k+1} = (1 + √(1 + 4t_k²))/2`, `t_0 = 1`.
pub fn tv_fist(problem: &TvProblem, cfg: &TvConfig) -> Result<TvResult> {
    let mut ctx = Ctx::new(problem, cfg)?;
    let (mut x, mut g) = zero_state(problem.lap.len());
    let (mut y, mut h) = zero_state(problem.lap.len());
    let mut t = 1.0f64;
    let mut w = None;
    let mut trace = SolverTrace::default();
    trace.records.push(ctx.record(0, &x, &g, w.as_ref())?);
    for k in 0..cfg.k_max {
        ctx.refresh(k, &x, &g, &mut w)?;
        let (xn, gn) = ctx.step(k, &y, &h.g1, &h.g2, w.as_ref())?;
        let tn = momentum_next(t);
        let c = if cfg.momentum { (t - 1.0) / tn } else { 0.0 };
        if c == 0.0 {
            y = xn.clone();
            h = gn.clone();
        } else {
            // L⁻¹Gᵀ(G x) = x, so the auxiliary image is the same extrapolation.
            y = &xn + &((&xn - &x) * c);
            let h1 = &gn.g1 + &((&gn.g1 - &g.g1) * c);
            let h2 = &gn.g2 + &((&gn.g2 - &g.g2) * c);
            h = GradientPair { g1: h1, g2: h2, g: Array1::zeros(0) };
        }
        x = xn;
        g = gn;
        t = tn;
        trace.records.push(ctx.record(k + 1, &x, &g, w.as_ref())?);
    }
    Ok(TvResult { x, trace, beta: ctx.beta })
}

/// `(1 + √(1 + 4t²)) / 2`.
pub fn momentum_next(t: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
}
