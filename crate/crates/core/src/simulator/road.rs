use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest allowed curvature change between adjacent 1 m samples.
pub const MAX_CURVATURE_STEP: f64 = 0.005;
pub const DEFAULT_KAPPA_MAX: f64 = 0.05;
pub const SAMPLE_SPACING: f64 = 1.0;
/// Slew limit used when generating roads; tighter than the continuity bound
/// so the preview expert stays well inside the lane.
pub const GENERATION_SLEW: f64 = 0.001;
/// Bump sums pass through a smooth limiter at this fraction of `kappa_max`,
/// leaving steering authority for corrections on the sharpest curves.
pub const CURVATURE_HEADROOM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Summer,
    Winter,
}

impl Season {
    pub const BOTH: [Season; 2] = [Season::Summer, Season::Winter];

    pub fn name(self) -> &'static str {
        match self {
            Season::Summer => "summer",
            Season::Winter => "winter",
        }
    }
}

impl fmt::Display for Season {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Season {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "summer" => Ok(Season::Summer),
            "winter" => Ok(Season::Winter),
            other => Err(Error::InvalidArgument(format!("unknown season `{other}`"))),
        }
    }
}

/// Curvature sampled on a uniform arc-length grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadProfile {
    pub seed: u64,
    pub season: Season,
    pub spacing: f64,
    /// `kappa[k]` is the curvature at `s = k * spacing` (1/m, positive = right turn).
    pub kappa: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadConfig {
    pub length: f64,
    pub kappa_max: f64,
    /// Divides the bump amplitudes; infinity gives a straight road.
    pub smoothness: f64,
}

impl Default for RoadConfig {
    fn default() -> Self {
        RoadConfig {
            length: 1000.0,
            kappa_max: DEFAULT_KAPPA_MAX,
            smoothness: 1.0,
        }
    }
}

impl RoadProfile {
    pub fn length(&self) -> f64 {
        (self.kappa.len().saturating_sub(1)) as f64 * self.spacing
    }

    /// Linear interpolation; the end values are held outside the grid.
    pub fn curvature_at(&self, s: f64) -> f64 {
        let last = self.kappa.len() - 1;
        let u = (s / self.spacing).max(0.0);
        let k = u.floor() as usize;
        if k >= last {
            return self.kappa[last];
        }
        let frac = u - k as f64;
        self.kappa[k] * (1.0 - frac) + self.kappa[k + 1] * frac
    }

    pub fn with_season(&self, season: Season) -> Self {
        RoadProfile {
            season,
            ..self.clone()
        }
    }

    /// Left-rectangle sum of `kappa * ds` over the segments of [`Self::polyline`].
    pub fn heading_change(&self) -> f64 {
        let k = self.kappa.len();
        self.kappa[..k.saturating_sub(2)].iter().map(|c| c * self.spacing).sum()
    }

    /// Centerline points obtained by integrating the heading segment by segment.
    pub fn polyline(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.kappa.len());
        let (mut x, mut y, mut th) = (0.0, 0.0, 0.0f64);
        pts.push((x, y));
        for c in &self.kappa[..self.kappa.len() - 1] {
            x += self.spacing * th.cos();
            y -= self.spacing * th.sin();
            th += c * self.spacing;
            pts.push((x, y));
        }
        pts
    }

    pub fn max_abs_curvature(&self) -> f64 {
        self.kappa.iter().fold(0.0, |a, &c| a.max(c.abs()))
    }

    pub fn straight(seed: u64, season: Season, length: f64) -> Self {
        let samples = (length / SAMPLE_SPACING).round() as usize + 1;
        RoadProfile {
            seed,
            season,
            spacing: SAMPLE_SPACING,
            kappa: vec![0.0; samples],
        }
    }
}

fn raised_cosine(s: f64, center: f64, half_width: f64) -> f64 {
    let u = (s - center) / half_width;
    if u.abs() >= 1.0 {
        0.0
    } else {
        0.5 * (1.0 + (PI * u).cos())
    }
}

fn satisfies_turns(kappa: &[f64], kappa_max: f64) -> bool {
    let left = kappa.iter().any(|&c| c <= -0.5 * kappa_max);
    let right = kappa.iter().any(|&c| c >= 0.5 * kappa_max);
    left && right
}

/// Procedural road: 8-20 raised-cosine curvature bumps with random center,
/// width, sign and amplitude, slew-limited to keep curvature continuous and
/// clipped to `kappa_max`. Deterministic per seed.
pub fn generate_road(seed: u64, season: Season, config: &RoadConfig) -> Result<RoadProfile> {
    let RoadConfig {
        length,
        kappa_max,
        smoothness,
    } = *config;
    if !(length >= 10.0) || !length.is_finite() {
        return Err(Error::InvalidArgument(format!("road length must be >= 10 m, got {length}")));
    }
    if !(kappa_max > 0.0) || !kappa_max.is_finite() {
        return Err(Error::InvalidArgument(format!("kappa_max must be positive, got {kappa_max}")));
    }
    if !(smoothness > 0.0) {
        return Err(Error::InvalidArgument(format!("smoothness must be positive, got {smoothness}")));
    }
    if smoothness.is_infinite() {
        return Ok(RoadProfile::straight(seed, season, length));
    }
    let samples = (length / SAMPLE_SPACING).round() as usize + 1;
    for attempt in 0..64u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(attempt));
        let bumps = rng.random_range(8..=20);
        let mut raw = vec![0.0; samples];
        for _ in 0..bumps {
            let center = rng.random_range(0.0..length);
            let half_width = rng.random_range(25.0..60.0);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let amp = sign * rng.random_range(0.4..1.0) * kappa_max / smoothness;
            for (k, v) in raw.iter_mut().enumerate() {
                *v += amp * raised_cosine(k as f64 * SAMPLE_SPACING, center, half_width);
            }
        }
        let mut kappa = Vec::with_capacity(samples);
        let mut prev = 0.0f64;
        let soft = CURVATURE_HEADROOM * kappa_max;
        for &v in &raw {
            let v = soft * (v / soft).tanh();
            let next = (prev + (v - prev).clamp(-GENERATION_SLEW, GENERATION_SLEW)).clamp(-kappa_max, kappa_max);
            kappa.push(next);
            prev = next;
        }
        if satisfies_turns(&kappa, kappa_max) {
            return Ok(RoadProfile {
                seed,
                season,
                spacing: SAMPLE_SPACING,
                kappa,
            });
        }
    }
    Err(Error::InfeasibleRoad(format!(
        "no road of length {length} m with turns of at least {} 1/m after 64 draws (smoothness {smoothness})",
        0.5 * kappa_max
    )))
}
