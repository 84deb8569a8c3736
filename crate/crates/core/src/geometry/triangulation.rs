use nalgebra::{DMatrix, Vector4};

use super::{project, CameraIntrinsics, GeometryError, Pose, Vec2, Vec3};

/// A triangulated point with its worst-view reprojection residual (pixels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangulated {
    pub point: Vec3,
    pub residual: f64,
}

const MIN_BASELINE: f64 = 1e-6;

/// Linear (DLT) triangulation from two calibrated views.
pub fn triangulate_two_view(
    pose_a: &Pose,
    pose_b: &Pose,
    px_a: &Vec2,
    px_b: &Vec2,
    k: &CameraIntrinsics,
) -> Result<Triangulated, GeometryError> {
    triangulate_multiview(&[(*pose_a, *px_a), (*pose_b, *px_b)], k)
}

/// DLT triangulation over any number (≥ 2) of views; the residual is the
/// maximum reprojection error over all views.
pub fn triangulate_multiview(
    views: &[(Pose, Vec2)],
    k: &CameraIntrinsics,
) -> Result<Triangulated, GeometryError> {
    if views.len() < 2 {
        return Err(GeometryError::InsufficientCorrespondences {
            needed: 2,
            got: views.len(),
        });
    }
    let centers: Vec<Vec3> = views.iter().map(|(p, _)| p.center()).collect();
    let baseline = centers
        .iter()
        .flat_map(|a| centers.iter().map(move |b| (a - b).norm()))
        .fold(0.0, f64::max);
    if baseline <= MIN_BASELINE {
        return Err(GeometryError::DegenerateBaseline);
    }

    let mut a = DMatrix::<f64>::zeros(2 * views.len(), 4);
    for (i, (pose, px)) in views.iter().enumerate() {
        let x = k.normalize(px);
        let r = pose.rotation_matrix();
        let t = pose.translation;
        let row = |j: usize| Vector4::new(r[(j, 0)], r[(j, 1)], r[(j, 2)], t[j]);
        let (p1, p2, p3) = (row(0), row(1), row(2));
        let e1 = x.x * p3 - p1;
        let e2 = x.y * p3 - p2;
        // rows are unit-scaled so each view weighs equally
        a.row_mut(2 * i).copy_from(&(e1 / e1.norm()).transpose());
        a.row_mut(2 * i + 1).copy_from(&(e2 / e2.norm()).transpose());
    }
    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or(GeometryError::DegenerateConfiguration("svd failed"))?;
    let (imin, _) = svd.singular_values.argmin();
    let h = v_t.row(imin);
    if h[3].abs() < 1e-14 {
        return Err(GeometryError::CheiralityFailure);
    }
    let point = Vec3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]);

    let mut residual = 0.0f64;
    for (pose, px) in views {
        let depth = pose.transform(&point).z;
        if depth <= 0.0 {
            return Err(GeometryError::CheiralityFailure);
        }
        let proj = project(pose, k, &point)?;
        residual = residual.max((proj - px).norm());
    }
    Ok(Triangulated { point, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn noise_free_round_trip() {
        let a = Pose::identity();
        let b = Pose::from_center(UnitQuaternion::identity(), Vec3::new(1.0, 0.0, 0.0));
        let p = Vec3::new(0.5, 0.0, 2.0);
        let pa = project(&a, &k(), &p).unwrap();
        let pb = project(&b, &k(), &p).unwrap();
        let t = triangulate_two_view(&a, &b, &pa, &pb, &k()).unwrap();
        assert!((t.point - p).norm() < 1e-9);
        assert!(t.residual < 1e-9);
    }

    #[test]
    fn identical_poses_are_degenerate() {
        let a = Pose::identity();
        let px = Vec2::new(300.0, 200.0);
        assert_eq!(
            triangulate_two_view(&a, &a, &px, &px, &k()),
            Err(GeometryError::DegenerateBaseline)
        );
    }

    #[test]
    fn point_behind_cameras_fails_cheirality() {
        // rays diverge: they only meet behind both cameras, at z = -2.5
        let a = Pose::identity();
        let b = Pose::from_center(UnitQuaternion::identity(), Vec3::new(1.0, 0.0, 0.0));
        let pa = k().denormalize(&Vec2::new(-0.2, 0.0));
        let pb = k().denormalize(&Vec2::new(0.2, 0.0));
        let err = triangulate_two_view(&a, &b, &pa, &pb, &k());
        assert_eq!(err, Err(GeometryError::CheiralityFailure));
    }

    #[test]
    fn random_configurations_reproject() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = k();
        let mut done = 0;
        while done < 1000 {
            let p = Vec3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let look = |rng: &mut ChaCha8Rng| {
                let c = p + Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-4.0..-1.0),
                );
                let dir = (p - c).normalize();
                let q = UnitQuaternion::rotation_between(&Vec3::z(), &dir).unwrap();
                let jitter = UnitQuaternion::from_euler_angles(
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-3.0..3.0),
                );
                Pose::from_center(q * jitter, c)
            };
            let (a, b) = (look(&mut rng), look(&mut rng));
            let (Ok(pa), Ok(pb)) = (project(&a, &k, &p), project(&b, &k, &p)) else {
                continue;
            };
            if (a.center() - b.center()).norm() < 0.05 {
                continue;
            }
            let t = triangulate_two_view(&a, &b, &pa, &pb, &k).unwrap();
            assert!(t.residual < 1e-6, "residual {}", t.residual);
            done += 1;
        }
    }
}
