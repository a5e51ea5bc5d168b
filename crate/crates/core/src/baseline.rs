//! Classical reconstruction baselines: LBP, Landweber, ART and SIRT.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, EctError, Result};
use crate::forward::{MeasurementVector, SensitivityMatrix};
use crate::operators::power_iteration;

/// Linear back-projection: `x = Sᵀλ / Sᵀ1`, zero where the column sum vanishes.
pub fn lbp(s: &SensitivityMatrix, m: &MeasurementVector) -> Result<Array1<f64>> {
    check_len(s.n_rows(), m.len())?;
    let num = s.s.t().dot(&m.lambda);
    let den = s.s.sum_axis(ndarray::Axis(0));
    Ok(num
        .iter()
        .zip(den.iter())
        .map(|(&a, &b)| if b == 0.0 { 0.0 } else { a / b })
        .collect())
}

/// Settings shared by the iterative baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterParams {
    pub iterations: usize,
    /// Landweber step; `None` means `step_scale / σ_max(S)²`.
    pub step: Option<f64>,
    /// Fraction of the largest stable-ish step used when `step` is unset;
    /// must lie in `(0, 2)`.
    pub step_scale: f64,
    /// Relaxation factor for ART and SIRT.
    pub relax: f64,
    /// Project onto `[0, 1]` after every iteration (sweep for ART).
    pub clamp: bool,
}

impl Default for IterParams {
    fn default() -> Self {
        Self {
            iterations: 500,
            step: None,
            step_scale: 1.0,
            relax: 1.0,
            clamp: true,
        }
    }
}

fn clamp01(x: &mut Array1<f64>) {
    x.mapv_inplace(|v| v.clamp(0.0, 1.0));
}

fn residual_norm2(s: &SensitivityMatrix, x: &Array1<f64>, lambda: &Array1<f64>) -> f64 {
    let r = s.s.dot(x) - lambda;
    r.dot(&r)
}

/// Largest eigenvalue of `SᵀS`.
pub fn normal_operator_norm(s: &SensitivityMatrix) -> Result<f64> {
    let pi = power_iteration(s.n_cols(), 500, 1e-10, 7, |v| Ok(s.s.t().dot(&s.s.dot(v))))?;
    Ok(pi.lambda)
}

/// Landweber iteration from `x = 0`: `x ← x + step · Sᵀ(λ - Sx)`.
///
/// Fails with [`EctError::Diverged`] if the residual grows on ten consecutive
/// iterations.
pub fn landweber(s: &SensitivityMatrix, m: &MeasurementVector, p: &IterParams) -> Result<Array1<f64>> {
    check_len(s.n_rows(), m.len())?;
    let step = match p.step {
        Some(v) if v > 0.0 && v.is_finite() => v,
        Some(v) => return Err(EctError::Config(format!("Landweber step must be positive, got {v}"))),
        None => {
            if !(p.step_scale > 0.0 && p.step_scale < 2.0) {
                return Err(EctError::Config(format!("step_scale must lie in (0, 2), got {}", p.step_scale)));
            }
            let l = normal_operator_norm(s)?;
            if !(l > 0.0) {
                return Err(EctError::Numerical {
                    iteration: 0,
                    reason: "sensitivity matrix is zero".into(),
                });
            }
            p.step_scale / l
        }
    };
    let mut x = Array1::zeros(s.n_cols());
    let mut prev = residual_norm2(s, &x, &m.lambda);
    let mut rising = 0;
    for it in 1..=p.iterations {
        let r = &m.lambda - &s.s.dot(&x);
        x.scaled_add(step, &s.s.t().dot(&r));
        if p.clamp {
            clamp01(&mut x);
        }
        let cost = residual_norm2(s, &x, &m.lambda);
        if !cost.is_finite() {
            return Err(EctError::Diverged { iteration: it });
        }
        rising = if cost > prev { rising + 1 } else { 0 };
        if rising >= 10 {
            return Err(EctError::Diverged { iteration: it });
        }
        prev = cost;
    }
    Ok(x)
}

fn row_norms2(s: &SensitivityMatrix) -> Vec<f64> {
    s.s.rows().into_iter().map(|r| r.dot(&r)).collect()
}

fn warn_zero_rows(norms: &[f64]) {
    let zero = norms.iter().filter(|&&n| n == 0.0).count();
    if zero > 0 {
        log::warn!("{zero} sensitivity rows are zero and will be skipped");
    }
}

/// Algebraic reconstruction technique (cyclic Kaczmarz).
pub fn art(s: &SensitivityMatrix, m: &MeasurementVector, p: &IterParams) -> Result<Array1<f64>> {
    check_len(s.n_rows(), m.len())?;
    let norms = row_norms2(s);
    warn_zero_rows(&norms);
    let mut x = Array1::zeros(s.n_cols());
    for it in 1..=p.iterations {
        for (l, row) in s.s.rows().into_iter().enumerate() {
            if norms[l] == 0.0 {
                continue;
            }
            let c = p.relax * (m.lambda[l] - row.dot(&x)) / norms[l];
            x.scaled_add(c, &row);
        }
        if p.clamp {
            clamp01(&mut x);
        }
        check_finite(&x, it)?;
    }
    Ok(x)
}

/// Simultaneous iterative reconstruction technique (averaged row projections).
pub fn sirt(s: &SensitivityMatrix, m: &MeasurementVector, p: &IterParams) -> Result<Array1<f64>> {
    check_len(s.n_rows(), m.len())?;
    let norms = row_norms2(s);
    warn_zero_rows(&norms);
    let weights: Array1<f64> = norms.iter().map(|&n| if n == 0.0 { 0.0 } else { 1.0 / n }).collect();
    let scale = p.relax / s.n_rows() as f64;
    let mut x = Array1::zeros(s.n_cols());
    for it in 1..=p.iterations {
        let r = (&m.lambda - &s.s.dot(&x)) * &weights;
        x.scaled_add(scale, &s.s.t().dot(&r));
        if p.clamp {
            clamp01(&mut x);
        }
        check_finite(&x, it)?;
    }
    Ok(x)
}

fn check_finite(x: &Array1<f64>, iteration: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(EctError::Numerical {
            iteration,
            reason: "non-finite image".into(),
        })
    }
}

/// `‖Sx - λ‖₂` for diagnostics.
pub fn residual_norm(s: &SensitivityMatrix, x: ArrayView1<f64>, m: &MeasurementVector) -> f64 {
    let r = s.s.dot(&x) - &m.lambda;
    r.dot(&r).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn toy(rows: usize, cols: usize, seed: u64) -> SensitivityMatrix {
        let mut st = seed | 1;
        let data = (0..rows * cols)
            .map(|_| {
                st ^= st << 13;
                st ^= st >> 7;
                st ^= st << 17;
                (st >> 11) as f64 / (1u64 << 53) as f64 + 0.05
            })
            .collect();
        SensitivityMatrix::new(Array2::from_shape_vec((rows, cols), data).unwrap(), vec![(0, 1); rows]).unwrap()
    }

    fn truth(n: usize) -> Array1<f64> {
        (0..n).map(|k| ((k * 37) % 11) as f64 / 10.0).collect()
    }

    fn max_err(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn lbp_identity_and_zero_columns() {
        let mut s = Array2::eye(4);
        s[(3, 3)] = 0.0;
        let s = SensitivityMatrix::new(s, vec![(0, 1); 4]).unwrap();
        let m = MeasurementVector::new(Array1::from(vec![0.2, 0.4, 0.9, 5.0]));
        let x = lbp(&s, &m).unwrap();
        assert_eq!(x.to_vec(), vec![0.2, 0.4, 0.9, 0.0]);
    }

    #[test]
    fn lbp_is_one_for_full_measurements() {
        let s = toy(12, 30, 4);
        let m = MeasurementVector::new(Array1::ones(12));
        assert!(lbp(&s, &m).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    fn centered(rows: usize, cols: usize, seed: u64) -> SensitivityMatrix {
        let mut s = toy(rows, cols, seed);
        s.s.mapv_inplace(|v| v - 0.55);
        s
    }

    fn lstsq_oracle(s: &SensitivityMatrix, lambda: &Array1<f64>) -> Array1<f64> {
        let a = nalgebra::DMatrix::from_fn(s.n_rows(), s.n_cols(), |r, c| s.s[(r, c)]);
        let b = nalgebra::DVector::from_iterator(lambda.len(), lambda.iter().copied());
        let x = a.svd(true, true).solve(&b, 1e-12).unwrap();
        x.iter().copied().collect()
    }

    #[test]
    fn iterative_methods_match_least_squares_on_8x8_toy() {
        let s = centered(96, 64, 11);
        let xt = truth(64);
        let lambda = s.s.dot(&xt) + &Array1::from_iter((0..96).map(|k| 1e-3 * ((k % 5) as f64 - 2.0)));
        let m = MeasurementVector::new(lambda.clone());
        let oracle = lstsq_oracle(&s, &lambda);
        let p = IterParams {
            iterations: 5000,
            clamp: false,
            ..Default::default()
        };
        let xl = landweber(&s, &m, &p).unwrap();
        assert!(max_err(&xl, &oracle) < 1e-6, "landweber {}", max_err(&xl, &oracle));
        let xs = sirt(&s, &m, &IterParams { iterations: 20000, relax: 1.9, ..p }).unwrap();
        let r_s = residual_norm(&s, xs.view(), &m);
        let r_o = residual_norm(&s, oracle.view(), &m);
        assert!(r_s < r_o * 1.01 + 1e-9, "sirt {r_s} vs {r_o}");
        let exact = MeasurementVector::new(s.s.dot(&xt));
        let xa = art(&s, &exact, &IterParams { iterations: 2000, ..p }).unwrap();
        assert!(max_err(&xa, &xt) < 1e-6, "art {}", max_err(&xa, &xt));
    }

    #[test]
    fn clamp_keeps_range() {
        let s = toy(10, 40, 2);
        let m = MeasurementVector::new(Array1::from_elem(10, 3.0));
        for x in [
            landweber(&s, &m, &IterParams::default()).unwrap(),
            art(&s, &m, &IterParams::default()).unwrap(),
            sirt(&s, &m, &IterParams::default()).unwrap(),
        ] {
            assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn oversized_step_diverges() {
        let s = toy(10, 20, 3);
        let m = MeasurementVector::new(Array1::ones(10));
        let p = IterParams {
            step: Some(100.0),
            clamp: false,
            ..Default::default()
        };
        assert!(matches!(landweber(&s, &m, &p), Err(EctError::Diverged { .. })));
    }

    #[test]
    fn step_scale_range() {
        let s = toy(10, 20, 3);
        let m = MeasurementVector::new(Array1::ones(10));
        for bad in [0.0, 2.0, -1.0] {
            let p = IterParams { step_scale: bad, ..Default::default() };
            assert!(matches!(landweber(&s, &m, &p), Err(EctError::Config(_))));
        }
        let p = IterParams { step_scale: 1.9, clamp: false, ..Default::default() };
        assert!(landweber(&s, &m, &p).is_ok());
    }

    #[test]
    fn zero_rows_are_skipped() {
        let mut s = toy(6, 10, 5);
        s.s.row_mut(2).fill(0.0);
        let m = MeasurementVector::new(Array1::from_elem(6, 0.5));
        assert!(art(&s, &m, &IterParams::default()).is_ok());
        assert!(sirt(&s, &m, &IterParams::default()).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        let s = toy(6, 10, 5);
        let m = MeasurementVector::new(Array1::zeros(5));
        assert!(matches!(lbp(&s, &m), Err(EctError::Dimension { .. })));
        assert!(landweber(&s, &m, &IterParams::default()).is_err());
    }
}
