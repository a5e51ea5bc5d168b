use ndarray::{concatenate, s, Array1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::laplacian::LaplacianSolver;
use crate::error::{EctError, Result};
use crate::forward::SensitivityMatrix;

/// Outcome of a power iteration.
#[derive(Debug, Clone)]
pub struct PowerIteration {
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest eigenvalue of a symmetric positive semi-definite operator.
/// Stops when the relative change of the Rayleigh quotient drops below
/// `rtol` or after `max_iter` applications.
pub fn power_iteration<F>(dim: usize, max_iter: usize, rtol: f64, seed: u64, mut apply: F) -> Result<PowerIteration>
where
    F: FnMut(&Array1<f64>) -> Result<Array1<f64>>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Array1<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.dot(&v).sqrt();
    v /= n;
    let mut lambda = 0.0;
    for it in 1..=max_iter {
        let w = apply(&v)?;
        let next = v.dot(&w);
        if !next.is_finite() {
            return Err(EctError::Numerical {
                iteration: it,
                reason: "power iteration produced a non-finite value".into(),
            });
        }
        let norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return Ok(PowerIteration { lambda: 0.0, iterations: it, converged: true });
        }
        let change = (next - lambda).abs();
        lambda = next;
        v = w / norm;
        if it > 1 && change <= rtol * lambda.abs() {
            return Ok(PowerIteration { lambda, iterations: it, converged: true });
        }
    }
    Ok(PowerIteration { lambda, iterations: max_iter, converged: false })
}

/// Step-size bound for the gradient-domain iterations.
#[derive(Debug, Clone)]
pub struct StepBound {
    /// Estimated largest eigenvalue of the gradient-domain normal operator.
    pub lambda_max: f64,
    /// Safe step `0.95 / lambda_max`.
    pub beta: f64,
    pub converged: bool,
}

const SAFETY: f64 = 0.95;

/// Bounds the step for the composite operator `A(g1, g2) = S L⁻¹(G1ᵀg1 + G2ᵀg2)`.
///
/// `AᵀA` shares its nonzero spectrum with `S L⁻¹ Sᵀ`, so when power iteration
/// fails to settle the trace of that matrix is used as an upper bound.
pub fn estimate_step_bound(s: &SensitivityMatrix, lap: &LaplacianSolver) -> Result<StepBound> {
    let n = lap.len();
    if s.n_cols() != n {
        return Err(EctError::Dimension { expected: n, got: s.n_cols() });
    }
    let t = lap.transforms();
    let pi = power_iteration(2 * n, 100, 1e-6, 0x5eed, |v| {
        let x = lap.ls_invert(&v.slice(s![..n]).to_owned(), &v.slice(s![n..]).to_owned())?;
        let z = s.s.t().dot(&s.s.dot(&x));
        let u = lap.solve(&z)?;
        let gp = t.apply(&u)?;
        Ok(concatenate(Axis(0), &[gp.g1.view(), gp.g2.view()]).expect("same rank"))
    })?;
    let (lambda_max, converged) = if pi.converged && pi.lambda > 0.0 {
        (pi.lambda, true)
    } else {
        log::warn!("power iteration did not converge; using trace bound");
        let mut trace = 0.0;
        for row in s.s.rows() {
            let r = row.to_owned();
            trace += r.dot(&lap.solve(&r)?);
        }
        (trace, false)
    };
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(EctError::Numerical {
            iteration: 0,
            reason: format!("invalid spectral bound {lambda_max}"),
        });
    }
    Ok(StepBound { lambda_max, beta: SAFETY / lambda_max, converged })
}
