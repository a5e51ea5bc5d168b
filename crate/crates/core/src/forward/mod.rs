//! Electrostatic forward model: potentials, capacitances, sensitivity maps
//! and normalized measurements.

mod noise;
mod potential;

use ndarray::{Array1, Array2};
use rayon::prelude::*;

pub use noise::add_noise;
pub use potential::{solve_potential, PotentialField, SorParams, Stencil};

use crate::error::{check_len, EctError, Result};
use crate::grid::{ElectrodeLayout, Grid, PermittivityField};

/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.854_187_812_8e-12;

/// Inter-electrode capacitances in pair order `(0,1), (0,2), …`.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacitanceVector {
    /// Farad per metre of sensor depth.
    pub c: Array1<f64>,
    pub pairs: Vec<(usize, usize)>,
}

impl CapacitanceVector {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }
}

/// Jacobian of normalized capacitances with respect to normalized pixel
/// permittivities. Row `l` is pair `pairs[l]`, column `k` is ROI pixel `k`.
#[derive(Debug, Clone)]
pub struct SensitivityMatrix {
    pub s: Array2<f64>,
    pub pairs: Vec<(usize, usize)>,
    pub base: Option<PermittivityField>,
}

impl SensitivityMatrix {
    pub fn new(s: Array2<f64>, pairs: Vec<(usize, usize)>) -> Result<Self> {
        check_len(s.nrows(), pairs.len())?;
        if s.iter().any(|v| !v.is_finite()) {
            return Err(EctError::Numerical {
                iteration: 0,
                reason: "sensitivity matrix has non-finite entries".into(),
            });
        }
        Ok(Self { s, pairs, base: None })
    }

    pub fn n_rows(&self) -> usize {
        self.s.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.s.ncols()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            s: &self.s * factor,
            pairs: self.pairs.clone(),
            base: self.base.clone(),
        }
    }
}

/// Normalized capacitance vector `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub lambda: Array1<f64>,
    pub snr_db: Option<f64>,
}

impl MeasurementVector {
    pub fn new(lambda: Array1<f64>) -> Self {
        Self { lambda, snr_db: None }
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }
}

/// Capacitance between the excited electrode of `phi` and electrode `detect`:
/// `C = -Q/V_c`, with `Q` the flux leaving the detecting electrode through
/// the lattice edges that join it to the rest of the domain.
pub fn compute_capacitance(
    phi: &PotentialField,
    field: &PermittivityField,
    layout: &ElectrodeLayout,
    detect: usize,
) -> Result<f64> {
    let stencil = Stencil::new(field, layout)?;
    capacitance_with(&stencil, phi, layout, detect)
}

fn capacitance_with(stencil: &Stencil, phi: &PotentialField, layout: &ElectrodeLayout, detect: usize) -> Result<f64> {
    if detect >= layout.n_electrodes() {
        return Err(EctError::Config(format!("detect electrode {detect} out of range")));
    }
    if detect == phi.excited {
        return Err(EctError::Config(format!(
            "detect electrode {detect} is the excited electrode"
        )));
    }
    let flat = phi.phi.as_slice().expect("standard layout");
    let mut q = 0.0;
    for &p in &layout.arcs()[detect] {
        for (nb, a) in stencil.edges(p) {
            match layout.owner(nb) {
                Some(k) if k == detect => {}
                Some(k) => {
                    return Err(EctError::Geometry(format!(
                        "flux contour of electrode {detect} crosses electrode {k}"
                    )))
                }
                None => q += a * (flat[p] - flat[nb]),
            }
        }
    }
    Ok(-EPS0 * q / layout.v_c())
}

/// The sensor: geometry, electrodes, wall permittivity, calibration states
/// and forward-solver settings.
#[derive(Debug, Clone)]
pub struct Sensor {
    pub grid: Grid,
    pub layout: ElectrodeLayout,
    pub wall_eps: f64,
    pub eps_empty: f64,
    pub eps_full: f64,
    pub sor: SorParams,
}

/// Calibration data for a sensor.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub c_empty: CapacitanceVector,
    pub c_full: CapacitanceVector,
    /// Sensitivity linearized at the empty state.
    pub sensitivity: SensitivityMatrix,
}

impl Sensor {
    pub fn new(grid: Grid, layout: ElectrodeLayout, wall_eps: f64, eps_empty: f64, eps_full: f64) -> Result<Self> {
        if eps_empty == eps_full {
            return Err(EctError::Config("calibration permittivities must differ".into()));
        }
        if layout.shape() != (grid.n1(), grid.n2()) {
            return Err(EctError::Geometry("layout and grid dimensions differ".into()));
        }
        Ok(Self {
            grid,
            layout,
            wall_eps,
            eps_empty,
            eps_full,
            sor: SorParams::default(),
        })
    }

    pub fn with_sor(mut self, sor: SorParams) -> Self {
        self.sor = sor;
        self
    }

    pub fn empty_field(&self) -> PermittivityField {
        PermittivityField::roi_uniform(&self.grid, self.eps_empty, self.wall_eps, self.eps_empty, self.eps_full)
    }

    pub fn full_field(&self) -> PermittivityField {
        PermittivityField::roi_uniform(&self.grid, self.eps_full, self.wall_eps, self.eps_empty, self.eps_full)
    }

    /// Field for a normalized ROI image (clamped to `[0, 1]`).
    pub fn field_from_image(&self, x: &Array1<f64>) -> Result<PermittivityField> {
        PermittivityField::from_normalized(&self.grid, x, self.wall_eps, self.eps_empty, self.eps_full)
    }

    /// Potentials for the given excitations; solves run in parallel.
    pub fn potentials_for(
        &self,
        field: &PermittivityField,
        excitations: &[usize],
        warm: Option<&[PotentialField]>,
    ) -> Result<Vec<PotentialField>> {
        let stencil = Stencil::new(field, &self.layout)?;
        excitations
            .par_iter()
            .map(|&k| {
                let init = warm.and_then(|w| w.iter().find(|p| p.excited == k)).map(|p| &p.phi);
                stencil.solve(&self.layout, k, &self.sor, init)
            })
            .collect()
    }

    /// One potential solve per electrode.
    pub fn potentials(&self, field: &PermittivityField) -> Result<Vec<PotentialField>> {
        let all: Vec<usize> = (0..self.layout.n_electrodes()).collect();
        self.potentials_for(field, &all, None)
    }

    /// All pair capacitances; needs one solve for each electrode except the last.
    pub fn capacitance_vector(&self, field: &PermittivityField) -> Result<CapacitanceVector> {
        let n = self.layout.n_electrodes();
        let exc: Vec<usize> = (0..n - 1).collect();
        let phis = self.potentials_for(field, &exc, None)?;
        self.capacitances_from(field, &phis)
    }

    /// Pair capacitances from precomputed potentials (must include every
    /// electrode except possibly the last).
    pub fn capacitances_from(&self, field: &PermittivityField, phis: &[PotentialField]) -> Result<CapacitanceVector> {
        let stencil = Stencil::new(field, &self.layout)?;
        let pairs = self.layout.pairs();
        let mut c = Array1::zeros(pairs.len());
        for (l, &(i, j)) in pairs.iter().enumerate() {
            let phi = phis
                .iter()
                .find(|p| p.excited == i)
                .ok_or_else(|| EctError::State(format!("no potential solve for electrode {i}")))?;
            c[l] = capacitance_with(&stencil, phi, &self.layout, j)?;
        }
        Ok(CapacitanceVector { c, pairs })
    }

    /// Raw sensitivity `∂C_ij/∂ε_p` for every pair and ROI pixel, from the
    /// potentials of all electrodes at a single field.
    ///
    /// With edge coefficients `a_pq = (ε_p + ε_q)/2` the derivative of the
    /// discrete energy form is exactly
    /// `-ε0/V² · ½ Σ_q (φ_i(p) - φ_i(q))(φ_j(p) - φ_j(q))`,
    /// i.e. the negated dot product of the two potential gradients with each
    /// component averaged over the two one-sided differences.
    pub fn raw_sensitivity(&self, phis: &[PotentialField]) -> Result<Array2<f64>> {
        let n = self.layout.n_electrodes();
        let mut by_electrode: Vec<Option<&PotentialField>> = vec![None; n];
        for p in phis {
            if p.excited < n {
                by_electrode[p.excited] = Some(p);
            }
        }
        let by_electrode: Vec<&PotentialField> = by_electrode
            .into_iter()
            .enumerate()
            .map(|(k, p)| p.ok_or_else(|| EctError::State(format!("missing potential solve for electrode {k}"))))
            .collect::<Result<_>>()?;
        let (n1, n2) = (self.grid.n1(), self.grid.n2());
        let roi = self.grid.roi_pixels();
        // diffs[k][pix][e] = φ_k(p) - φ_k(neighbour e), zero where absent.
        let diffs: Vec<Vec<[f64; 4]>> = by_electrode
            .iter()
            .map(|pf| {
                let phi = pf.phi.as_slice().expect("standard layout");
                roi.iter()
                    .map(|&p| {
                        let (r, c) = (p / n2, p % n2);
                        let mut d = [0.0; 4];
                        let nbs = [
                            (r > 0).then(|| p - n2),
                            (r + 1 < n1).then(|| p + n2),
                            (c > 0).then(|| p - 1),
                            (c + 1 < n2).then(|| p + 1),
                        ];
                        for (slot, q) in d.iter_mut().zip(nbs) {
                            if let Some(q) = q {
                                *slot = phi[p] - phi[q];
                            }
                        }
                        d
                    })
                    .collect()
            })
            .collect();
        let v2 = self.layout.v_c() * self.layout.v_c();
        let pairs = self.layout.pairs();
        let mut s = Array2::zeros((pairs.len(), roi.len()));
        for (l, &(i, j)) in pairs.iter().enumerate() {
            let (di, dj) = (&diffs[i], &diffs[j]);
            for k in 0..roi.len() {
                let dot: f64 = (0..4).map(|e| di[k][e] * dj[k][e]).sum();
                s[(l, k)] = -EPS0 * 0.5 * dot / v2;
            }
        }
        Ok(s)
    }

    /// Normalized sensitivity matrix at `base`, using the calibration
    /// capacitances for row scaling.
    pub fn sensitivity_matrix(
        &self,
        base: &PermittivityField,
        phis: &[PotentialField],
        c_empty: &CapacitanceVector,
        c_full: &CapacitanceVector,
    ) -> Result<SensitivityMatrix> {
        let mut s = self.raw_sensitivity(phis)?;
        check_len(s.nrows(), c_empty.len())?;
        check_len(s.nrows(), c_full.len())?;
        let de = self.eps_full - self.eps_empty;
        for (l, mut row) in s.rows_mut().into_iter().enumerate() {
            let dc = c_full.c[l] - c_empty.c[l];
            if dc == 0.0 || !dc.is_finite() {
                return Err(EctError::Calibration(format!("degenerate calibration for pair {l}")));
            }
            row *= de / dc;
        }
        let mut sm = SensitivityMatrix::new(s, self.layout.pairs())?;
        sm.base = Some(base.clone());
        Ok(sm)
    }

    /// Empty/full calibration capacitances and the sensitivity matrix at the
    /// empty state.
    pub fn calibrate(&self) -> Result<Calibration> {
        let empty = self.empty_field();
        let full = self.full_field();
        let phis_empty = self.potentials(&empty)?;
        let c_empty = self.capacitances_from(&empty, &phis_empty)?;
        let c_full = self.capacitance_vector(&full)?;
        let sensitivity = self.sensitivity_matrix(&empty, &phis_empty, &c_empty, &c_full)?;
        Ok(Calibration {
            c_empty,
            c_full,
            sensitivity,
        })
    }

    /// Normalized, noiseless measurements of `field`.
    pub fn measure(&self, field: &PermittivityField, calib: &Calibration) -> Result<MeasurementVector> {
        let c = self.capacitance_vector(field)?;
        normalize_measurements(&c, &calib.c_empty, &calib.c_full)
    }

    /// Sensitivity matrix rebuilt at the field implied by a normalized image.
    pub fn adaptive_sensitivity(&self, x: &Array1<f64>, calib: &Calibration) -> Result<SensitivityMatrix> {
        let field = self.field_from_image(x)?;
        let phis = self.potentials(&field)?;
        self.sensitivity_matrix(&field, &phis, &calib.c_empty, &calib.c_full)
    }
}

/// `λ = (c - c_low) / (c_high - c_low)` element-wise.
pub fn normalize_measurements(
    c: &CapacitanceVector,
    c_low: &CapacitanceVector,
    c_high: &CapacitanceVector,
) -> Result<MeasurementVector> {
    check_len(c_low.len(), c.len())?;
    check_len(c_high.len(), c.len())?;
    let mut lambda = Array1::zeros(c.len());
    for l in 0..c.len() {
        let span = c_high.c[l] - c_low.c[l];
        let scale = c_high.c[l].abs().max(c_low.c[l].abs());
        if !(span.abs() > 1e-14 * scale) {
            return Err(EctError::Calibration(format!(
                "pair {l}: calibration capacitances are (nearly) equal"
            )));
        }
        lambda[l] = (c.c[l] - c_low.c[l]) / span;
    }
    Ok(MeasurementVector::new(lambda))
}

/// Inverse of [`normalize_measurements`].
pub fn denormalize_measurements(
    m: &MeasurementVector,
    c_low: &CapacitanceVector,
    c_high: &CapacitanceVector,
) -> Result<CapacitanceVector> {
    check_len(c_low.len(), m.len())?;
    check_len(c_high.len(), m.len())?;
    let c = m
        .lambda
        .iter()
        .enumerate()
        .map(|(l, &v)| c_low.c[l] + v * (c_high.c[l] - c_low.c[l]))
        .collect();
    Ok(CapacitanceVector {
        c,
        pairs: c_low.pairs.clone(),
    })
}
