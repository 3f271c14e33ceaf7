use crate::error::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
/// `(0.01 L)^2` and `(0.03 L)^2` with dynamic range `L = 1`.
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn ssim_term(mu_a: f64, mu_b: f64, var_a: f64, var_b: f64, cov: f64) -> f64 {
    ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2))
        / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2))
}

/// Valid-mode separable filter of a `h x w` grid with `taps`.
fn filter_valid(src: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&line[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(i, t)| t * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM of two `height x width` grayscale images with values in
/// `[0, 1]`, over every fully contained 11x11 Gaussian window. Images
/// smaller than the window fall back to one global, unweighted window.
pub fn ssim(a: &[f64], b: &[f64], height: usize, width: usize) -> Result<f64> {
    let n = height * width;
    for img in [a, b] {
        if img.len() != n {
            return Err(Error::Dimension {
                context: "ssim image",
                expected: n,
                actual: img.len(),
            });
        }
    }
    if n == 0 {
        return Err(Error::Empty("ssim image"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { array: "ssim image".into() });
    }
    if height < SSIM_WINDOW || width < SSIM_WINDOW {
        let k = n as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / k, b.iter().sum::<f64>() / k);
        let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
        for (&x, &y) in a.iter().zip(b) {
            va += x * x;
            vb += y * y;
            cov += x * y;
        }
        return Ok(ssim_term(ma, mb, va / k - ma * ma, vb / k - mb * mb, cov / k - ma * mb));
    }
    let taps = gaussian_taps();
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect() };
    let mu_a = filter_valid(a, height, width, &taps);
    let mu_b = filter_valid(b, height, width, &taps);
    let aa = filter_valid(&prod(&|x, _| x * x), height, width, &taps);
    let bb = filter_valid(&prod(&|_, y| y * y), height, width, &taps);
    let ab = filter_valid(&prod(&|x, y| x * y), height, width, &taps);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            ssim_term(ma, mb, aa[i] - ma * ma, bb[i] - mb * mb, ab[i] - ma * mb)
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}
