use serde::{Deserialize, Serialize};

use super::{GeometryError, Pose, Vec2, Vec3};

/// Pinhole intrinsics; inputs are assumed rectified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(GeometryError::InvalidParameter(
                "focal lengths must be positive".into(),
            ));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64)
            || !(self.cy >= 0.0 && self.cy < self.height as f64)
        {
            return Err(GeometryError::InvalidParameter(
                "principal point outside image".into(),
            ));
        }
        Ok(())
    }

    /// Projects a camera-frame point.
    pub fn project_camera(&self, pc: &Vec3) -> Result<Vec2, GeometryError> {
        if pc.z <= 1e-9 {
            return Err(GeometryError::BehindCamera(pc.z));
        }
        Ok(Vec2::new(
            self.fx * pc.x / pc.z + self.cx,
            self.fy * pc.y / pc.z + self.cy,
        ))
    }

    /// Pixel to normalized image coordinates (`K⁻¹` applied).
    pub fn normalize(&self, px: &Vec2) -> Vec2 {
        Vec2::new((px.x - self.cx) / self.fx, (px.y - self.cy) / self.fy)
    }

    pub fn denormalize(&self, xn: &Vec2) -> Vec2 {
        Vec2::new(xn.x * self.fx + self.cx, xn.y * self.fy + self.cy)
    }

    /// Unit bearing through a pixel, camera frame.
    pub fn bearing(&self, px: &Vec2) -> Vec3 {
        let n = self.normalize(px);
        Vec3::new(n.x, n.y, 1.0).normalize()
    }

    pub fn contains(&self, px: &Vec2) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x < self.width as f64 && px.y < self.height as f64
    }
}

/// Projects a world point through `pose` and `k`.
pub fn project(pose: &Pose, k: &CameraIntrinsics, p: &Vec3) -> Result<Vec2, GeometryError> {
    k.project_camera(&pose.transform(p))
}
