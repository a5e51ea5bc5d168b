//! Finite-difference solution of `∇·(ε∇φ) = 0` on the pixel lattice.
//!
//! Each free pixel satisfies the weighted five-point balance
//! `φ_p = Σ a_pq φ_q / Σ a_pq` where the edge coefficient `a_pq` is the mean
//! permittivity of the two pixels it joins. Electrode pixels are Dirichlet
//! nodes; missing neighbours beyond the lattice edge make the outer boundary
//! zero-flux.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{EctError, Result};
use crate::grid::{ElectrodeLayout, PermittivityField};

/// Red-black successive over-relaxation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SorParams {
    pub omega: f64,
    /// Stop once the largest per-pixel update is at most `tol * v_c`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SorParams {
    fn default() -> Self {
        Self {
            omega: 1.8,
            tol: 1e-6,
            max_sweeps: 50_000,
        }
    }
}

impl SorParams {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(EctError::Config(format!("SOR omega must lie in (0, 2), got {}", self.omega)));
        }
        if !(self.tol > 0.0) {
            return Err(EctError::Config(format!("solver tolerance must be positive, got {}", self.tol)));
        }
        if self.max_sweeps == 0 {
            return Err(EctError::Config("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Potential distribution for one excited electrode.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub phi: Array2<f64>,
    pub excited: usize,
    /// Largest update of the final sweep, relative to `v_c`.
    pub residual: f64,
    pub sweeps: usize,
}

/// Lattice stencil for one permittivity field. Reusable across excitations.
#[derive(Debug, Clone)]
pub struct Stencil {
    n1: usize,
    n2: usize,
    // Per pixel: up to four (neighbour, coefficient) pairs; unused slots have
    // zero weight and point at the pixel itself.
    nb: Vec<[(u32, f64); 4]>,
    diag: Vec<f64>,
    owner: Vec<Option<usize>>,
    red: Vec<u32>,
    black: Vec<u32>,
}

impl Stencil {
    pub fn new(field: &PermittivityField, layout: &ElectrodeLayout) -> Result<Self> {
        let (n1, n2) = field.shape();
        if layout.shape() != (n1, n2) {
            return Err(EctError::Geometry(format!(
                "field is {n1}x{n2} but electrode layout is {:?}",
                layout.shape()
            )));
        }
        let eps = field.eps.as_slice().expect("standard layout");
        if let Some(bad) = eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(EctError::Config(format!("permittivity must be positive and finite, got {bad}")));
        }
        let n = n1 * n2;
        let mut nb = vec![[(0u32, 0.0); 4]; n];
        let mut diag = vec![0.0; n];
        let mut owner = Vec::with_capacity(n);
        let mut red = Vec::new();
        let mut black = Vec::new();
        for r in 0..n1 {
            for c in 0..n2 {
                let p = r * n2 + c;
                owner.push(layout.owner(p));
                let cand = [
                    (r > 0).then(|| p - n2),
                    (r + 1 < n1).then(|| p + n2),
                    (c > 0).then(|| p - 1),
                    (c + 1 < n2).then(|| p + 1),
                ];
                let mut slots = [(p as u32, 0.0); 4];
                let mut sum = 0.0;
                for (slot, q) in slots.iter_mut().zip(cand) {
                    if let Some(q) = q {
                        let a = 0.5 * (eps[p] + eps[q]);
                        *slot = (q as u32, a);
                        sum += a;
                    }
                }
                nb[p] = slots;
                diag[p] = sum;
                if layout.owner(p).is_none() {
                    if (r + c) % 2 == 0 {
                        red.push(p as u32);
                    } else {
                        black.push(p as u32);
                    }
                }
            }
        }
        Ok(Self {
            n1,
            n2,
            nb,
            diag,
            owner,
            red,
            black,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    /// Edge coefficients `(neighbour, a_pq)` of pixel `p`.
    pub fn edges(&self, p: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nb[p]
            .iter()
            .filter(|(_, a)| *a > 0.0)
            .map(|&(q, a)| (q as usize, a))
    }

    /// Dirichlet data: `v_c` on the excited electrode, 0 on the others.
    fn boundary_values(&self, excited: usize, v_c: f64) -> Vec<Option<f64>> {
        self.owner
            .iter()
            .map(|o| o.map(|k| if k == excited { v_c } else { 0.0 }))
            .collect()
    }

    /// Runs red-black SOR until the largest update falls to `tol * v_c`.
    /// `initial`, when given, seeds the free pixels.
    pub fn solve(
        &self,
        layout: &ElectrodeLayout,
        excited: usize,
        params: &SorParams,
        initial: Option<&Array2<f64>>,
    ) -> Result<PotentialField> {
        params.validate()?;
        if excited >= layout.n_electrodes() {
            return Err(EctError::Config(format!(
                "excited electrode {excited} out of range (n = {})",
                layout.n_electrodes()
            )));
        }
        let v_c = layout.v_c();
        let fixed = self.boundary_values(excited, v_c);
        let mut phi: Vec<f64> = match initial {
            Some(init) if init.dim() == (self.n1, self.n2) => init.iter().copied().collect(),
            _ => vec![0.0; self.n1 * self.n2],
        };
        for (v, f) in phi.iter_mut().zip(&fixed) {
            if let Some(f) = f {
                *v = *f;
            }
        }
        let omega = params.omega;
        let limit = params.tol * v_c.abs();
        let mut max_update = f64::INFINITY;
        for sweep in 1..=params.max_sweeps {
            max_update = 0.0;
            for set in [&self.red, &self.black] {
                for &p in set.iter() {
                    let p = p as usize;
                    let d = self.diag[p];
                    if d == 0.0 {
                        continue;
                    }
                    let s: f64 = self.nb[p].iter().map(|&(q, a)| a * phi[q as usize]).sum();
                    let delta = omega * (s / d - phi[p]);
                    phi[p] += delta;
                    max_update = max_update.max(delta.abs());
                }
            }
            if !max_update.is_finite() {
                break;
            }
            if max_update <= limit {
                return Ok(PotentialField {
                    phi: Array2::from_shape_vec((self.n1, self.n2), phi).expect("shape"),
                    excited,
                    residual: max_update / v_c.abs(),
                    sweeps: sweep,
                });
            }
        }
        Err(EctError::Solver {
            sweeps: params.max_sweeps,
            residual: max_update / v_c.abs(),
        })
    }
}

/// Solves the potential for one excited electrode.
pub fn solve_potential(
    field: &PermittivityField,
    layout: &ElectrodeLayout,
    excited: usize,
    params: &SorParams,
) -> Result<PotentialField> {
    Stencil::new(field, layout)?.solve(layout, excited, params, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn maximum_principle_uniform_field() {
        let g = Grid::new(32, 32, 0.45).unwrap();
        let l = ElectrodeLayout::place(&g, 8, 0.8, 1.0).unwrap();
        let f = PermittivityField::uniform(32, 32, 2.0, 1.0, 3.0);
        let pf = solve_potential(&f, &l, 3, &SorParams::default()).unwrap();
        assert!(pf.phi.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
        assert!(pf.residual <= 1e-6);
    }

    #[test]
    fn slab_is_linear() {
        let (n1, n2) = (10, 21);
        let left: Vec<usize> = (0..n1).map(|r| r * n2).collect();
        let right: Vec<usize> = (0..n1).map(|r| r * n2 + n2 - 1).collect();
        let l = ElectrodeLayout::from_arcs(n1, n2, vec![left, right], 1.0).unwrap();
        let f = PermittivityField::uniform(n1, n2, 1.0, 1.0, 2.0);
        let params = SorParams::with_tol(1e-10);
        let pf = solve_potential(&f, &l, 0, &params).unwrap();
        for r in 0..n1 {
            for c in 0..n2 {
                let expect = 1.0 - c as f64 / (n2 - 1) as f64;
                assert!((pf.phi[(r, c)] - expect).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let g = Grid::new(32, 32, 0.45).unwrap();
        let l = ElectrodeLayout::place(&g, 8, 0.8, 1.0).unwrap();
        let f = PermittivityField::uniform(32, 32, 2.0, 1.0, 3.0);
        let params = SorParams { max_sweeps: 3, ..SorParams::default() };
        match solve_potential(&f, &l, 0, &params) {
            Err(EctError::Solver { sweeps, residual }) => {
                assert_eq!(sweeps, 3);
                assert!(residual > 1e-6);
            }
            other => panic!("expected solver error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_excitation() {
        let g = Grid::new(16, 16, 0.45).unwrap();
        let l = ElectrodeLayout::place(&g, 4, 0.5, 1.0).unwrap();
        let f = PermittivityField::uniform(16, 16, 1.0, 1.0, 2.0);
        assert!(solve_potential(&f, &l, 4, &SorParams::default()).is_err());
        assert!(solve_potential(&f, &l, 0, &SorParams { tol: 0.0, ..Default::default() }).is_err());
    }
}
