//! Closed-loop driving: the policy's steering feeds back into the next view.

use serde::{Deserialize, Serialize};

use super::camera::{render_camera, CameraConfig};
use super::dataset::frame_seed;
use super::expert::{expert_steer, EXPERT_LOOKAHEAD};
use super::road::{RoadProfile, Season};
use super::vehicle::{vehicle_step, VehicleState, SIM_DT};
use crate::error::Result;
use crate::perception::{add_gaussian_noise, Frame};

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub steering: f64,
    pub features: Vec<f64>,
    pub hidden: Vec<f64>,
}

/// Anything that maps the current camera view to a steering command.
/// Privileged access to the road and pose is only meant for scripted
/// reference policies.
pub trait DrivingPolicy {
    fn reset(&mut self);
    fn act(&mut self, frame: &Frame<f64>, road: &RoadProfile, state: &VehicleState) -> Result<PolicyOutput>;
}

/// The scripted expert wrapped as a policy.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExpertPolicy;

impl DrivingPolicy for ExpertPolicy {
    fn reset(&mut self) {}

    fn act(&mut self, _frame: &Frame<f64>, road: &RoadProfile, state: &VehicleState) -> Result<PolicyOutput> {
        Ok(PolicyOutput {
            steering: expert_steer(road, state),
            features: Vec::new(),
            hidden: Vec::new(),
        })
    }
}

/// Always steers straight.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPolicy;

impl DrivingPolicy for ZeroPolicy {
    fn reset(&mut self) {}

    fn act(&mut self, _frame: &Frame<f64>, _road: &RoadProfile, _state: &VehicleState) -> Result<PolicyOutput> {
        Ok(PolicyOutput {
            steering: 0.0,
            features: Vec::new(),
            hidden: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub s: f64,
    pub d: f64,
    pub psi: f64,
    pub pred: f64,
    pub expert: f64,
    /// Curvature at the expert's preview distance.
    pub kappa: f64,
    pub h: Vec<f64>,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub road_seed: u64,
    pub season: Season,
    pub road_length: f64,
    pub seed: u64,
    pub noise_variance: f64,
    pub steps: Vec<TraceStep>,
    /// Noise-free frames, one per step, when requested.
    pub frames: Vec<Frame<f64>>,
    pub crashed: bool,
    /// Arc length reached when the episode ended.
    pub final_s: f64,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Number of hidden units logged per step.
    pub fn m(&self) -> usize {
        self.steps.first().map_or(0, |s| s.h.len())
    }

    pub fn completion(&self) -> f64 {
        if self.road_length > 0.0 {
            (self.final_s / self.road_length).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn predictions(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.pred).collect()
    }

    pub fn curvature(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.kappa).collect()
    }

    pub fn hidden(&self, i: usize) -> Vec<f64> {
        self.steps.iter().map(|s| s.h[i]).collect()
    }

    pub fn max_abs_offset(&self) -> f64 {
        self.steps.iter().fold(0.0, |a, s| a.max(s.d.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutConfig {
    pub camera: CameraConfig,
    /// Variance of Gaussian pixel noise added to the policy's input.
    pub noise_variance: f64,
    pub keep_frames: bool,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            camera: CameraConfig::default(),
            noise_variance: 0.0,
            keep_frames: false,
        }
    }
}

/// Drives `road` from the centered start pose under `policy` until the road
/// ends or the vehicle leaves the lane.
pub fn rollout_closed_loop<P: DrivingPolicy + ?Sized>(
    policy: &mut P,
    road: &RoadProfile,
    config: &RolloutConfig,
    seed: u64,
) -> Result<EpisodeTrace> {
    policy.reset();
    let mut trace = EpisodeTrace {
        road_seed: road.seed,
        season: road.season,
        road_length: road.length(),
        seed,
        noise_variance: config.noise_variance,
        steps: Vec::new(),
        frames: Vec::new(),
        crashed: false,
        final_s: 0.0,
    };
    let mut state = VehicleState::default();
    for t in 0.. {
        let fs = frame_seed(road.seed ^ seed, road.season, t);
        let clean = render_camera(road, &state, &config.camera, fs);
        let out = if config.noise_variance > 0.0 {
            let noisy = add_gaussian_noise(&clean, config.noise_variance, fs.rotate_left(17))?;
            policy.act(&noisy, road, &state)?
        } else {
            policy.act(&clean, road, &state)?
        };
        trace.steps.push(TraceStep {
            t,
            s: state.s,
            d: state.d,
            psi: state.psi,
            pred: out.steering,
            expert: expert_steer(road, &state),
            kappa: road.curvature_at(state.s + EXPERT_LOOKAHEAD),
            h: out.hidden,
            features: out.features,
        });
        if config.keep_frames {
            trace.frames.push(clean);
        }
        let next = vehicle_step(&state, out.steering, road, SIM_DT);
        state = next.state;
        trace.final_s = state.s.min(trace.road_length);
        if !state.in_lane() {
            trace.crashed = true;
            break;
        }
        if next.terminal {
            break;
        }
    }
    Ok(trace)
}
