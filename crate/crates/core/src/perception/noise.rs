use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::frame::Frame;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `count` i.i.d. draws of `N(0, variance)`, deterministic per seed.
pub fn noise_field(count: usize, variance: f64, seed: u64) -> Result<Vec<f64>> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be non-negative, got {variance}"
        )));
    }
    if variance == 0.0 {
        return Ok(vec![0.0; count]);
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| normal.sample(&mut rng)).collect())
}

/// Adds zero-mean Gaussian noise of the given variance to every pixel and
/// clamps the result to `[0, 1]`.
pub fn add_gaussian_noise<T: Scalar>(frame: &Frame<T>, variance: f64, seed: u64) -> Result<Frame<T>> {
    let noise = noise_field(frame.data.len(), variance, seed)?;
    let mut out = frame.clone();
    if variance == 0.0 {
        return Ok(out);
    }
    for (v, z) in out.data.iter_mut().zip(noise) {
        *v += T::lit(z);
    }
    out.clamp_unit();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_variance_is_identity() {
        let f = Frame::<f64>::grayscale(2, 3, vec![0.0, 0.1, 0.5, 0.9, 1.0, 0.3]).unwrap();
        assert_eq!(add_gaussian_noise(&f, 0.0, 4).unwrap(), f);
    }

    #[test]
    fn negative_variance_rejected() {
        let f = Frame::<f64>::filled(1, 2, 2, 0.5);
        assert!(add_gaussian_noise(&f, -0.1, 0).is_err());
        assert!(add_gaussian_noise(&f, f64::NAN, 0).is_err());
    }

    #[test]
    fn seeded_and_clamped() {
        let f = Frame::<f64>::filled(1, 8, 8, 0.5);
        let a = add_gaussian_noise(&f, 0.2, 17).unwrap();
        let b = add_gaussian_noise(&f, 0.2, 17).unwrap();
        let c = add_gaussian_noise(&f, 0.2, 18).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn noise_statistics() {
        let z = noise_field(1_000_000, 0.1, 2024).unwrap();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.003, "mean {mean}");
        assert!((var - 0.1).abs() <= 0.02 * 0.1, "var {var}");
    }
}
