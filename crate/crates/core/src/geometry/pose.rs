use nalgebra::{Matrix3, Point3, Rotation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Rigid transform from world to camera coordinates: `x_cam = R * x_world + t`.
///
/// The rotation is stored as a unit quaternion so that serialization
/// round-trips bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Builds a pose from a rotation matrix, re-orthonormalizing it first.
    pub fn from_matrix(r: &Matrix3<f64>, translation: Vector3<f64>) -> Self {
        // nearest rotation (polar factor)
        let svd = r.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let mut fix = Matrix3::identity();
        if (u * v_t).determinant() < 0.0 {
            fix[(2, 2)] = -1.0;
        }
        let rot = Rotation3::from_matrix_unchecked(u * fix * v_t);
        Self {
            rotation: UnitQuaternion::from_rotation_matrix(&rot),
            translation,
        }
    }

    /// Pose of a camera centred at `center` (world frame) whose camera-to-world
    /// rotation is `orientation`.
    pub fn from_center(orientation: UnitQuaternion<f64>, center: Vector3<f64>) -> Self {
        let rotation = orientation.inverse();
        Self {
            rotation,
            translation: -(rotation * center),
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Camera centre in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.inverse() * self.translation)
    }

    /// Camera-to-world orientation.
    pub fn orientation(&self) -> UnitQuaternion<f64> {
        self.rotation.inverse()
    }

    pub fn transform(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.transform(&p.coords))
    }

    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.inverse();
        Self {
            rotation,
            translation: -(rotation * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Relative transform taking camera-A coordinates to camera-B coordinates.
    pub fn relative_to(a: &Pose, b: &Pose) -> Self {
        b.compose(&a.inverse())
    }

    /// Applies a left-multiplied axis-angle increment and an additive
    /// translation increment.
    pub fn retract(&self, dtheta: &Vector3<f64>, dt: &Vector3<f64>) -> Self {
        let dq = UnitQuaternion::from_scaled_axis(*dtheta);
        Self {
            rotation: dq * self.rotation,
            translation: dq * self.translation + dt,
        }
    }

    pub fn rotate_about(axis: &Unit<Vector3<f64>>, angle: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(axis, angle)
    }
}

/// `[v]×`, the cross-product matrix.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_composes_to_identity() {
        let p = Pose::new(
            UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1),
            Vector3::new(0.5, -1.0, 2.0),
        );
        let id = p.compose(&p.inverse());
        assert!(id.translation.norm() < 1e-12);
        assert!(id.rotation.angle() < 1e-12);
    }

    #[test]
    fn center_maps_to_camera_origin() {
        let c = Vector3::new(1.0, 2.0, 3.0);
        let p = Pose::from_center(UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3), c);
        assert!(p.transform(&c).norm() < 1e-12);
        assert!((p.center() - c).norm() < 1e-12);
    }

    #[test]
    fn rotation_matrix_is_orthonormal() {
        let p = Pose::new(UnitQuaternion::from_euler_angles(2.0, -1.0, 0.5), Vector3::zeros());
        let r = p.rotation_matrix();
        assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-9);
        assert!((r.determinant() - 1.0).abs() < 1e-9);
    }
}
