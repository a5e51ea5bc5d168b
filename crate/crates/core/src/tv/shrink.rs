use ndarray::Array1;

use crate::error::{check_len, EctError, Result};

/// Scalar soft threshold `(|b| - min(α, |b|)) · sgn(b)`.
#[inline]
pub fn soft_threshold(b: f64, alpha: f64) -> f64 {
    let a = b.abs();
    if a == 0.0 {
        return 0.0;
    }
    (a - alpha.min(a)) * b.signum()
}

/// Element-wise soft thresholding.
pub fn shrink(b: &Array1<f64>, alpha: f64) -> Array1<f64> {
    b.mapv(|v| soft_threshold(v, alpha))
}

/// Isotropic 2D shrinkage: both components are scaled by `T_α(ĝ)/ĝ` where
/// `ĝ` is the per-pixel magnitude. Zero-magnitude pixels map to zero.
pub fn shrink_2d(g1: &Array1<f64>, g2: &Array1<f64>, alpha: f64) -> Result<(Array1<f64>, Array1<f64>)> {
    check_len(g1.len(), g2.len())?;
    let n = g1.len();
    let mut o1 = Array1::zeros(n);
    let mut o2 = Array1::zeros(n);
    for i in 0..n {
        let m = (g1[i] * g1[i] + g2[i] * g2[i]).sqrt();
        let r = if m == 0.0 { 0.0 } else { soft_threshold(m, alpha) / m };
        o1[i] = r * g1[i];
        o2[i] = r * g2[i];
    }
    Ok((o1, o2))
}

/// Weighted 2D shrinkage: the scale factor is `T_α(wĝ)/(wĝ)`, zero where
/// `wĝ = 0`. With `w ≡ 1` this is exactly [`shrink_2d`].
pub fn weighted_shrink_2d(
    g1: &Array1<f64>,
    g2: &Array1<f64>,
    w: &Array1<f64>,
    alpha: f64,
) -> Result<(Array1<f64>, Array1<f64>)> {
    check_len(g1.len(), g2.len())?;
    check_len(g1.len(), w.len())?;
    let n = g1.len();
    let mut o1 = Array1::zeros(n);
    let mut o2 = Array1::zeros(n);
    for i in 0..n {
        let m = w[i] * (g1[i] * g1[i] + g2[i] * g2[i]).sqrt();
        let r = if m == 0.0 { 0.0 } else { soft_threshold(m, alpha) / m };
        o1[i] = r * g1[i];
        o2[i] = r * g2[i];
    }
    Ok((o1, o2))
}

/// `w = 1 / (g + ρ)`.
pub fn update_weights(g: &Array1<f64>, rho: f64) -> Result<Array1<f64>> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(EctError::Config(format!("rho must be positive, got {rho}")));
    }
    Ok(g.mapv(|v| 1.0 / (v.abs() + rho)))
}
