use super::road::RoadProfile;
use super::vehicle::{VehicleState, MAX_YAW_RATE};

/// Preview distance of the scripted driver.
pub const EXPERT_LOOKAHEAD: f64 = 8.0;
pub const GAIN_OFFSET: f64 = 0.4;
pub const GAIN_HEADING: f64 = 1.5;

/// Scripted driver: curvature feed-forward at the preview point plus
/// proportional correction of lateral offset and heading error.
pub fn expert_steer(road: &RoadProfile, state: &VehicleState) -> f64 {
    let feed_forward = road.curvature_at(state.s + EXPERT_LOOKAHEAD) * state.v;
    ((feed_forward - GAIN_OFFSET * state.d - GAIN_HEADING * state.psi) / MAX_YAW_RATE).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::road::{RoadProfile, Season};

    #[test]
    fn straight_centered_is_zero() {
        let road = RoadProfile::straight(0, Season::Summer, 100.0);
        assert_eq!(expert_steer(&road, &VehicleState::default()), 0.0);
    }

    #[test]
    fn corrects_toward_center() {
        let road = RoadProfile::straight(0, Season::Summer, 100.0);
        let right = VehicleState {
            d: 0.5,
            ..VehicleState::default()
        };
        assert!(expert_steer(&road, &right) < 0.0);
        let left = VehicleState {
            d: -0.5,
            ..VehicleState::default()
        };
        assert!(expert_steer(&road, &left) > 0.0);
    }

    #[test]
    fn seed_seven_kilometer_regression() {
        use crate::simulator::dataset::{expert_rollout, ExecutionNoise};
        use crate::simulator::road::{generate_road, RoadConfig};
        let road = generate_road(7, Season::Summer, &RoadConfig::default()).unwrap();
        let tr = expert_rollout(&road, ExecutionNoise::NONE, 0).unwrap();
        assert_eq!(tr.len(), 1001);
        assert!((tr.max_abs_offset() - 0.350_296_016_227_766_6).abs() < 1e-12);
    }
}
