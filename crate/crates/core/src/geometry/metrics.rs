use super::{GeometryError, Mat3, Vec3};

/// Geodesic angle between two rotations, in degrees within [0, 180].
///
/// Evaluated as `atan2(sin θ, cos θ)` with `cos θ = (tr(RaᵀRb) − 1)/2`, which
/// equals the clamped arccos form but keeps full precision near 0° and 180°.
pub fn rotation_error_deg(ra: &Mat3, rb: &Mat3) -> f64 {
    let m = ra.transpose() * rb;
    let c = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let s = 0.5
        * Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm();
    s.atan2(c).to_degrees().clamp(0.0, 180.0)
}

/// Angle between two translation directions, in degrees.
pub fn translation_heading_error_deg(ta: &Vec3, tb: &Vec3) -> Result<f64, GeometryError> {
    let (na, nb) = (ta.norm(), tb.norm());
    if na <= 0.0 || nb <= 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(GeometryError::UndefinedHeading);
    }
    let c = ta.dot(tb) / (na * nb);
    let s = ta.cross(tb).norm() / (na * nb);
    Ok(s.atan2(c).to_degrees())
}
