//! Expert demonstrations and the open-loop window dataset.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::camera::{render_camera, CameraConfig};
use super::expert::{expert_steer, EXPERT_LOOKAHEAD};
use super::road::{RoadProfile, Season};
use super::vehicle::{vehicle_step, VehicleState, SIM_DT};
use crate::error::{Error, Result};
use crate::perception::Frame;

/// Deterministic per-frame seed for renderer speckle.
pub fn frame_seed(road_seed: u64, season: Season, step: usize) -> u64 {
    let mut z = road_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(step as u64)
        .wrapping_add(if season == Season::Winter { 1 << 40 } else { 0 });
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Steering disturbance injected while collecting demonstrations. The
/// recorded label is always the clean expert command at the visited state;
/// the executed command adds smooth AR(1) noise so the data covers
/// recoveries from off-center poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutionNoise {
    pub std: f64,
    pub correlation: f64,
    /// Lateral offset (m) beyond which the disturbance is withheld and the
    /// expert's steering is applied unchanged.
    pub guard: f64,
}

impl ExecutionNoise {
    pub const NONE: ExecutionNoise = ExecutionNoise {
        std: 0.0,
        correlation: 0.0,
        guard: f64::INFINITY,
    };
}

impl Default for ExecutionNoise {
    fn default() -> Self {
        ExecutionNoise {
            std: 0.2,
            correlation: 0.95,
            guard: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertRollout {
    pub road: RoadProfile,
    /// State at which each frame is rendered.
    pub states: Vec<VehicleState>,
    /// Clean expert steering at each state.
    pub labels: Vec<f64>,
    /// Steering that was actually applied.
    pub executed: Vec<f64>,
}

impl ExpertRollout {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn max_abs_offset(&self) -> f64 {
        self.states.iter().fold(0.0, |a, s| a.max(s.d.abs()))
    }

    pub fn frame(&self, step: usize, cam: &CameraConfig) -> Frame<f64> {
        render_camera(
            &self.road,
            &self.states[step],
            cam,
            frame_seed(self.road.seed, self.road.season, step),
        )
    }

    /// Curvature at the expert's preview point for every step.
    pub fn lookahead_curvature(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| self.road.curvature_at(s.s + EXPERT_LOOKAHEAD))
            .collect()
    }
}

/// Drives the road with the scripted expert from the centered start pose
/// until the road ends or the lane is left.
pub fn expert_rollout(road: &RoadProfile, noise: ExecutionNoise, seed: u64) -> Result<ExpertRollout> {
    if !(noise.std >= 0.0 && (0.0..1.0).contains(&noise.correlation) && noise.guard > 0.0) {
        return Err(Error::InvalidArgument(format!("execution noise {noise:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innovation = Normal::new(0.0, noise.std * (1.0 - noise.correlation.powi(2)).sqrt())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut state = VehicleState::default();
    let mut disturbance = 0.0;
    let mut out = ExpertRollout {
        road: road.clone(),
        states: Vec::new(),
        labels: Vec::new(),
        executed: Vec::new(),
    };
    loop {
        let label = expert_steer(road, &state);
        if noise.std > 0.0 {
            disturbance = noise.correlation * disturbance + innovation.sample(&mut rng);
        }
        let applied = if state.d.abs() < noise.guard {
            (label + disturbance).clamp(-1.0, 1.0)
        } else {
            label
        };
        out.states.push(state);
        out.labels.push(label);
        out.executed.push(applied);
        let next = vehicle_step(&state, applied, road, SIM_DT);
        if next.terminal || !next.state.in_lane() {
            break;
        }
        state = next.state;
    }
    Ok(out)
}

/// Start indices of all windows of `window` steps taken every `stride` steps.
pub fn window_starts(len: usize, window: usize, stride: usize) -> Vec<usize> {
    if window == 0 || stride == 0 || len < window {
        return Vec::new();
    }
    (0..=(len - window) / stride).map(|k| k * stride).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowRef {
    pub rollout: usize,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub window: usize,
    pub stride: usize,
    /// Train and validation fractions; the test split takes the rest.
    pub train_fraction: f64,
    pub validation_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            window: 32,
            stride: 16,
            train_fraction: 0.7,
            validation_fraction: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub camera: CameraConfig,
    pub rollouts: Vec<ExpertRollout>,
    pub train: Vec<WindowRef>,
    pub validation: Vec<WindowRef>,
    pub test: Vec<WindowRef>,
}

/// Step ranges `[start, end)` of the three contiguous segments of a rollout.
pub fn split_bounds(len: usize, config: &DatasetConfig) -> [(usize, usize); 3] {
    let a = (len as f64 * config.train_fraction).round() as usize;
    let b = (len as f64 * (config.train_fraction + config.validation_fraction)).round() as usize;
    let (a, b) = (a.min(len), b.min(len).max(a.min(len)));
    [(0, a), (a, b), (b, len)]
}

/// Cuts every rollout into train/validation/test segments and slides
/// windows inside each segment, so no window straddles a split boundary.
pub fn build_dataset(rollouts: Vec<ExpertRollout>, config: DatasetConfig, camera: CameraConfig) -> Result<Dataset> {
    let f = (config.train_fraction, config.validation_fraction);
    if config.window == 0 || config.stride == 0 || !(f.0 > 0.0 && f.1 >= 0.0 && f.0 + f.1 <= 1.0) {
        return Err(Error::InvalidArgument(format!("dataset config {config:?}")));
    }
    if rollouts.is_empty() {
        return Err(Error::Empty("rollouts"));
    }
    let mut ds = Dataset {
        config,
        camera,
        rollouts,
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (r, ro) in ds.rollouts.iter().enumerate() {
        if ro.len() < config.window {
            return Err(Error::InvalidArgument(format!(
                "rollout {r} has {} steps, shorter than one window of {}",
                ro.len(),
                config.window
            )));
        }
        let bounds = split_bounds(ro.len(), &config);
        for (split, (lo, hi)) in Split::ALL.into_iter().zip(bounds) {
            let refs = window_starts(hi - lo, config.window, config.stride)
                .into_iter()
                .map(|s| WindowRef {
                    rollout: r,
                    start: lo + s,
                    len: config.window,
                });
            match split {
                Split::Train => ds.train.extend(refs),
                Split::Validation => ds.validation.extend(refs),
                Split::Test => ds.test.extend(refs),
            }
        }
    }
    Ok(ds)
}

impl Dataset {
    pub fn windows(&self, split: Split) -> &[WindowRef] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    /// Frames and expert labels of one window.
    pub fn materialize(&self, w: &WindowRef) -> (Vec<Frame<f64>>, Vec<f64>) {
        let ro = &self.rollouts[w.rollout];
        let frames = (w.start..w.start + w.len).map(|t| ro.frame(t, &self.camera)).collect();
        (frames, ro.labels[w.start..w.start + w.len].to_vec())
    }

    /// Mean training label, the constant predictor used as a baseline.
    pub fn train_label_mean(&self) -> f64 {
        let (sum, count) = self.train.iter().fold((0.0, 0usize), |(s, c), w| {
            let l = &self.rollouts[w.rollout].labels[w.start..w.start + w.len];
            (s + l.iter().sum::<f64>(), c + l.len())
        });
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    /// MSE of predicting `value` for every label of a split.
    pub fn constant_mse(&self, split: Split, value: f64) -> f64 {
        let (sum, count) = self.windows(split).iter().fold((0.0, 0usize), |(s, c), w| {
            let l = &self.rollouts[w.rollout].labels[w.start..w.start + w.len];
            (s + l.iter().map(|y| (y - value).powi(2)).sum::<f64>(), c + l.len())
        });
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}
