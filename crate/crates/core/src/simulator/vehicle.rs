use serde::{Deserialize, Serialize};

use super::road::RoadProfile;

/// Lane half-width: the vehicle is in lane while `|d| < W`.
pub const LANE_HALF_WIDTH: f64 = 2.0;
/// Yaw-rate authority of a full steering command, rad/s.
pub const MAX_YAW_RATE: f64 = 0.5;
pub const SIM_DT: f64 = 0.1;
pub const DEFAULT_SPEED: f64 = 10.0;

/// Pose relative to the road centerline. `d > 0` is right of center and
/// `psi > 0` points to the right of the road tangent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub s: f64,
    pub d: f64,
    pub psi: f64,
    pub v: f64,
}

impl Default for VehicleState {
    fn default() -> Self {
        VehicleState {
            s: 0.0,
            d: 0.0,
            psi: 0.0,
            v: DEFAULT_SPEED,
        }
    }
}

impl VehicleState {
    pub fn in_lane(&self) -> bool {
        self.d.abs() < LANE_HALF_WIDTH
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: VehicleState,
    /// Set once the vehicle has passed the end of the road.
    pub terminal: bool,
}

/// Explicit kinematic update with the steering command clamped to `[-1, 1]`:
/// `s += v cos(psi) dt`, `d += v sin(psi) dt`,
/// `psi += (steering u_max - kappa(s) v) dt`.
pub fn vehicle_step(state: &VehicleState, steering: f64, road: &RoadProfile, dt: f64) -> StepOutcome {
    let steer = if steering.is_nan() { 0.0 } else { steering.clamp(-1.0, 1.0) };
    let kappa = road.curvature_at(state.s);
    let next = VehicleState {
        s: state.s + state.v * state.psi.cos() * dt,
        d: state.d + state.v * state.psi.sin() * dt,
        psi: state.psi + (steer * MAX_YAW_RATE - kappa * state.v) * dt,
        v: state.v,
    };
    StepOutcome {
        terminal: next.s >= road.length(),
        state: next,
    }
}
