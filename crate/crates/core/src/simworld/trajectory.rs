use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Roll,
    Pitch,
    Yaw,
    TranslateForward,
    TranslateLateral,
}

impl std::str::FromStr for TrajectoryKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "roll" => Self::Roll,
            "pitch" => Self::Pitch,
            "yaw" => Self::Yaw,
            "translate_forward" | "forward" => Self::TranslateForward,
            "translate_lateral" | "lateral" => Self::TranslateLateral,
            _ => return Err(format!("unknown trajectory kind '{s}'")),
        })
    }
}

/// Body frame: x forward, y left, z up. The camera looks along body x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryParams {
    /// Body position of the first pose (world frame).
    pub center: Vec3,
    /// Initial body yaw / pitch / roll, degrees.
    pub heading_deg: [f64; 3],
    pub steps: usize,
    /// Total rotation for roll/pitch/yaw kinds, degrees.
    pub sweep_deg: f64,
    /// Total travel for translation kinds, meters.
    pub distance: f64,
    pub t0: f64,
    pub dt: f64,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        Self {
            center: Vec3::new(3.0, 0.0, 0.0),
            heading_deg: [0.0; 3],
            steps: 36,
            sweep_deg: 360.0,
            distance: 2.0,
            t0: 0.0,
            dt: 0.1,
        }
    }
}

/// Camera axes expressed in the body frame (columns: cam x, cam y, cam z).
fn body_from_camera() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0)
}

/// Body-to-world rotation from yaw (z), pitch (y), roll (x), applied in that
/// order by right-multiplication.
pub fn body_orientation(yaw: f64, pitch: f64, roll: f64) -> Matrix3<f64> {
    let r = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), pitch)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), roll);
    r.into_inner()
}

/// World-to-camera pose of a body at `center` with body-to-world rotation `r_wb`.
pub fn camera_pose(r_wb: &Matrix3<f64>, center: &Vec3) -> Pose {
    let r_wc = Rotation3::from_matrix_unchecked(r_wb * body_from_camera());
    Pose::from_center(UnitQuaternion::from_rotation_matrix(&r_wc), *center)
}

pub fn generate_trajectory(kind: TrajectoryKind, params: &TrajectoryParams) -> Vec<(f64, Pose)> {
    let [y0, p0, r0] = params.heading_deg.map(f64::to_radians);
    let base = body_orientation(y0, p0, r0);
    let n = params.steps.max(1) as f64;
    let ang = params.sweep_deg.to_radians() / n;
    let lin = params.distance / n;
    (0..params.steps)
        .map(|i| {
            let s = i as f64;
            let (r_wb, c) = match kind {
                TrajectoryKind::Yaw => (base * body_orientation(s * ang, 0.0, 0.0), params.center),
                TrajectoryKind::Pitch => (base * body_orientation(0.0, s * ang, 0.0), params.center),
                TrajectoryKind::Roll => (base * body_orientation(0.0, 0.0, s * ang), params.center),
                TrajectoryKind::TranslateForward => {
                    (base, params.center + base.column(0) * (s * lin))
                }
                TrajectoryKind::TranslateLateral => {
                    (base, params.center + base.column(1) * (s * lin))
                }
            };
            (params.t0 + s * params.dt, camera_pose(&r_wb, &c))
        })
        .collect()
}
