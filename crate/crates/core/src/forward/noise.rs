use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::MeasurementVector;

/// Adds white Gaussian noise so that `10·log10(‖λ‖² / E‖n‖²) = snr_db`.
///
/// An infinite (or NaN) `snr_db` disables noise and returns the input
/// unchanged. The output is a deterministic function of `seed`.
pub fn add_noise(m: &MeasurementVector, snr_db: f64, seed: u64) -> MeasurementVector {
    if !snr_db.is_finite() || m.is_empty() {
        return m.clone();
    }
    let signal = m.lambda.dot(&m.lambda) / m.len() as f64;
    let sigma = (signal / 10f64.powf(snr_db / 10.0)).sqrt();
    if sigma == 0.0 {
        return MeasurementVector {
            lambda: m.lambda.clone(),
            snr_db: Some(snr_db),
        };
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = m.lambda.mapv(|v| v + normal.sample(&mut rng));
    MeasurementVector {
        lambda,
        snr_db: Some(snr_db),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    fn sample() -> MeasurementVector {
        MeasurementVector::new(Array1::from_iter((0..66).map(|k| 0.05 + 0.9 * ((k * 37) % 66) as f64 / 66.0)))
    }

    #[test]
    fn infinite_snr_is_identity() {
        let m = sample();
        assert_eq!(add_noise(&m, f64::INFINITY, 3), m);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let m = sample();
        assert_eq!(add_noise(&m, 35.0, 11), add_noise(&m, 35.0, 11));
        assert_ne!(add_noise(&m, 35.0, 11), add_noise(&m, 35.0, 12));
    }

    #[test]
    fn empirical_snr_matches_target() {
        let m = sample();
        let s = m.lambda.dot(&m.lambda);
        let mean_noise: f64 = (0..1000u64)
            .map(|seed| {
                let n = &add_noise(&m, 35.0, seed).lambda - &m.lambda;
                n.dot(&n)
            })
            .sum::<f64>()
            / 1000.0;
        let snr = 10.0 * (s / mean_noise).log10();
        assert!((snr - 35.0).abs() < 0.5, "empirical SNR {snr}");
    }
}
