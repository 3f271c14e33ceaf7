//! Strip camera: each image row looks at one lookahead distance and the
//! two lane boundaries are projected into it by perspective division.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::road::{RoadProfile, Season};
use super::vehicle::{VehicleState, LANE_HALF_WIDTH};
use crate::perception::{Frame, FRAME_HEIGHT, FRAME_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub height: usize,
    pub width: usize,
    /// Lookahead of the bottom row, m.
    pub near: f64,
    /// Lookahead of the top row, m.
    pub far: f64,
    /// Pixels per meter of lateral offset at unit distance.
    pub scale: f64,
    /// Painted boundary width, m.
    pub edge_width: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            height: FRAME_HEIGHT,
            width: FRAME_WIDTH,
            near: 2.0,
            far: 50.0,
            scale: 35.0,
            edge_width: 0.15,
        }
    }
}

struct Palette {
    background: f64,
    road: f64,
    edge: f64,
    speckle: f64,
}

fn palette(season: Season) -> Palette {
    match season {
        Season::Summer => Palette {
            background: 0.4,
            road: 0.8,
            edge: 0.1,
            speckle: 0.0,
        },
        Season::Winter => Palette {
            background: 0.9,
            road: 0.72,
            edge: 0.55,
            speckle: 0.08,
        },
    }
}

impl CameraConfig {
    /// Log-spaced lookahead of row `r` (row 0 is the top, farthest row).
    pub fn lookahead(&self, row: usize) -> f64 {
        let frac = if self.height > 1 {
            (self.height - 1 - row) as f64 / (self.height - 1) as f64
        } else {
            0.0
        };
        self.near * (self.far / self.near).powf(frac)
    }

    /// Column of the image center line.
    pub fn center(&self) -> f64 {
        self.width as f64 / 2.0 - 0.5
    }
}

/// Lateral displacement of the centerline `Q(L) = int_0^L (L - q) kappa(s + q) dq`
/// evaluated at each requested distance (ascending not required).
pub fn centerline_offsets(road: &RoadProfile, s: f64, distances: &[f64]) -> Vec<f64> {
    let far = distances.iter().copied().fold(0.0, f64::max);
    let h = 0.25;
    let steps = (far / h).ceil() as usize + 1;
    // heading and lateral offset along the road, trapezoid rule
    let mut lateral = Vec::with_capacity(steps + 1);
    let (mut theta, mut y) = (0.0, 0.0);
    lateral.push(0.0);
    let mut k_prev = road.curvature_at(s);
    for i in 1..=steps {
        let k = road.curvature_at(s + i as f64 * h);
        let theta_next = theta + 0.5 * h * (k_prev + k);
        y += 0.5 * h * (theta + theta_next);
        theta = theta_next;
        k_prev = k;
        lateral.push(y);
    }
    distances
        .iter()
        .map(|&l| {
            let u = l / h;
            let i = (u.floor() as usize).min(steps - 1);
            let frac = u - i as f64;
            lateral[i] * (1.0 - frac) + lateral[i + 1] * frac
        })
        .collect()
}

/// Effective offset `d + psi L - Q(L)` of the vehicle relative to the
/// centerline point seen at distance `L`.
pub fn effective_offsets(road: &RoadProfile, state: &VehicleState, cam: &CameraConfig) -> Vec<f64> {
    let dist: Vec<f64> = (0..cam.height).map(|r| cam.lookahead(r)).collect();
    let q = centerline_offsets(road, state.s, &dist);
    dist.iter()
        .zip(q)
        .map(|(&l, ql)| state.d + state.psi * l - ql)
        .collect()
}

/// Real-valued `(left, right)` boundary columns for every row.
pub fn boundary_columns(road: &RoadProfile, state: &VehicleState, cam: &CameraConfig) -> Vec<(f64, f64)> {
    let cx = cam.center();
    effective_offsets(road, state, cam)
        .into_iter()
        .enumerate()
        .map(|(r, d_eff)| {
            let l = cam.lookahead(r);
            (
                cx + cam.scale * (-LANE_HALF_WIDTH - d_eff) / l,
                cx + cam.scale * (LANE_HALF_WIDTH - d_eff) / l,
            )
        })
        .collect()
}

/// Grayscale frame of the lane ahead. Summer: bright road on a mid-gray
/// background with dark edges. Winter: low-contrast road on a bright
/// background plus seeded speckle.
pub fn render_camera(road: &RoadProfile, state: &VehicleState, cam: &CameraConfig, seed: u64) -> Frame<f64> {
    let pal = palette(road.season);
    let mut data = vec![pal.background; cam.height * cam.width];
    for (r, (left, right)) in boundary_columns(road, state, cam).into_iter().enumerate() {
        let l = cam.lookahead(r);
        let half = (0.5 * cam.scale * cam.edge_width / l).round();
        let (el, er) = (left.round(), right.round());
        let row = &mut data[r * cam.width..(r + 1) * cam.width];
        for (c, px) in row.iter_mut().enumerate() {
            let c = c as f64;
            if (c - el).abs() <= half || (c - er).abs() <= half {
                *px = pal.edge;
            } else if c > left && c < right {
                *px = pal.road;
            }
        }
    }
    if pal.speckle > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for px in &mut data {
            *px = (*px + rng.random_range(-pal.speckle..pal.speckle)).clamp(0.0, 1.0);
        }
    }
    Frame {
        channels: 1,
        height: cam.height,
        width: cam.width,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight() -> RoadProfile {
        RoadProfile::straight(0, Season::Summer, 200.0)
    }

    #[test]
    fn centered_straight_view_is_symmetric() {
        let cam = CameraConfig::default();
        let f = render_camera(&straight(), &VehicleState::default(), &cam, 0);
        for r in 0..cam.height {
            for c in 0..cam.width {
                // mirror within one column
                let m = cam.width - 1 - c;
                let ok = (m.saturating_sub(1)..=(m + 1).min(cam.width - 1)).any(|mm| f.at(0, r, mm) == f.at(0, r, c));
                assert!(ok, "row {r} col {c}");
            }
        }
        for (l, rr) in boundary_columns(&straight(), &VehicleState::default(), &cam) {
            assert!((l + rr - 2.0 * cam.center()).abs() < 1e-9);
        }
    }

    #[test]
    fn offset_moves_boundaries_left() {
        let cam = CameraConfig::default();
        let base = boundary_columns(&straight(), &VehicleState::default(), &cam);
        let shifted = boundary_columns(
            &straight(),
            &VehicleState {
                d: 0.5,
                ..VehicleState::default()
            },
            &cam,
        );
        for (a, b) in base.iter().zip(&shifted) {
            assert!(b.0 < a.0 && b.1 < a.1);
        }
    }

    #[test]
    fn hand_projected_row() {
        let cam = CameraConfig::default();
        let state = VehicleState {
            d: 0.4,
            psi: 0.01,
            ..VehicleState::default()
        };
        let row = 40;
        // L = 2 * 25^(7/47); straight road so Q = 0.
        let l = 2.0 * 25f64.powf(7.0 / 47.0);
        let d_eff = 0.4 + 0.01 * l;
        let left = (79.5 + 35.0 * (-2.0 - d_eff) / l).round();
        let right = (79.5 + 35.0 * (2.0 - d_eff) / l).round();
        let f = render_camera(&straight(), &state, &cam, 0);
        assert_eq!(f.at(0, row, left as usize), 0.1);
        assert_eq!(f.at(0, row, right as usize), 0.1);
        let cols = boundary_columns(&straight(), &state, &cam)[row];
        assert_eq!((cols.0.round(), cols.1.round()), (left, right));
    }

    #[test]
    fn curvature_offsets_match_closed_form_on_an_arc() {
        let road = RoadProfile {
            seed: 0,
            season: Season::Summer,
            spacing: 1.0,
            kappa: vec![0.02; 200],
        };
        let q = centerline_offsets(&road, 10.0, &[5.0, 20.0, 50.0]);
        for (l, v) in [5.0, 20.0, 50.0].iter().zip(q) {
            assert!((v - 0.5 * 0.02 * l * l).abs() < 1e-9);
        }
    }

    #[test]
    fn winter_speckle_is_seeded() {
        let cam = CameraConfig::default();
        let road = straight().with_season(Season::Winter);
        let a = render_camera(&road, &VehicleState::default(), &cam, 5);
        let b = render_camera(&road, &VehicleState::default(), &cam, 5);
        let c = render_camera(&road, &VehicleState::default(), &cam, 6);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
