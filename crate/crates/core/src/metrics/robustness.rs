use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ssim::ssim;
use crate::error::{Error, Result};
use crate::perception::{add_gaussian_noise, saliency, ConvHead, Frame, SaliencyMap};
use crate::scalar::Scalar;

pub const DEFAULT_VARIANCES: [f64; 2] = [0.1, 0.2];

/// Five-number summary plus mean, with linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

impl BoxStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("samples"));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFinite { array: "samples".into() });
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        Ok(BoxStats {
            count: s.len(),
            mean: samples.iter().sum::<f64>() / s.len() as f64,
            min: s[0],
            q1: quantile(&s, 0.25),
            median: quantile(&s, 0.5),
            q3: quantile(&s, 0.75),
            max: s[s.len() - 1],
        })
    }
}

/// SSIM between clean-frame and noisy-frame saliency, one sample per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsimSamples {
    pub variance: f64,
    pub samples: Vec<f64>,
    pub summary: BoxStats,
}

pub fn noise_seed(seed: u64, variance: f64, frame: usize) -> u64 {
    let mut z = seed ^ variance.to_bits().rotate_left(29) ^ (frame as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn saliency_ssim<T: Scalar>(a: &SaliencyMap<T>, b: &SaliencyMap<T>) -> Result<f64> {
    if (a.height, a.width) != (b.height, b.width) {
        return Err(Error::Dimension {
            context: "saliency maps",
            expected: a.height * a.width,
            actual: b.height * b.width,
        });
    }
    let f = |m: &SaliencyMap<T>| m.data.iter().map(|v| v.as_f64()).collect::<Vec<_>>();
    ssim(&f(a), &f(b), a.height, a.width)
}

/// For every variance and frame, the SSIM between the saliency of the clean
/// frame and of the same frame with Gaussian pixel noise. Zero variance
/// reproduces the clean frame and gives exactly 1.
pub fn ssim_robustness<T: Scalar>(
    head: &ConvHead<T>,
    frames: &[Frame<f64>],
    variances: &[f64],
    seed: u64,
) -> Result<Vec<SsimSamples>> {
    if frames.is_empty() {
        return Err(Error::Empty("frames"));
    }
    let clean: Vec<SaliencyMap<T>> = frames
        .par_iter()
        .map(|f| saliency(head, &f.cast()))
        .collect::<Result<_>>()?;
    variances
        .iter()
        .map(|&variance| {
            let samples = frames
                .par_iter()
                .zip(&clean)
                .enumerate()
                .map(|(i, (f, c))| {
                    let noisy = add_gaussian_noise(f, variance, noise_seed(seed, variance, i))?;
                    saliency_ssim(c, &saliency(head, &noisy.cast())?)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(SsimSamples {
                variance,
                summary: BoxStats::from_samples(&samples)?,
                samples,
            })
        })
        .collect()
}
