//! Procedural lane-keeping environment.

pub mod camera;
pub mod dataset;
pub mod expert;
pub mod road;
pub mod rollout;
pub mod trace;
pub mod vehicle;

pub use camera::{boundary_columns, render_camera, CameraConfig};
pub use dataset::{
    build_dataset, expert_rollout, split_bounds, window_starts, Dataset, DatasetConfig, ExecutionNoise, ExpertRollout, Split,
    WindowRef,
};
pub use expert::expert_steer;
pub use road::{generate_road, RoadConfig, RoadProfile, Season};
pub use rollout::{rollout_closed_loop, DrivingPolicy, EpisodeTrace, ExpertPolicy, PolicyOutput, RolloutConfig, TraceStep, ZeroPolicy};
pub use trace::{read_trace, write_trace};
pub use vehicle::{vehicle_step, VehicleState, LANE_HALF_WIDTH, SIM_DT};
