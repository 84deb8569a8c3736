use nalgebra::{DMatrix, Matrix3, Vector3};

use super::{skew, GeometryError, Mat3, Vec2, Vec3};

/// A 3×3 essential matrix, defined up to scale. Constraint: `x_bᵀ E x_a = 0`
/// for normalized homogeneous coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialMatrix(pub Mat3);

impl EssentialMatrix {
    /// Rescaled to unit Frobenius norm (sign kept).
    pub fn normalized(&self) -> Self {
        Self(self.0 / self.0.norm())
    }

    /// Frobenius norms of `det(E)` and `2EEᵀE − tr(EEᵀ)E` after unit scaling.
    pub fn constraint_residuals(&self) -> (f64, f64) {
        let e = self.normalized().0;
        let eet = e * e.transpose();
        let trace = 2.0 * eet * e - eet.trace() * e;
        (e.determinant().abs(), trace.norm())
    }

    pub fn algebraic_residual(&self, xa: &Vec2, xb: &Vec2) -> f64 {
        let (ha, hb) = (xa.push(1.0), xb.push(1.0));
        hb.dot(&(self.0 * ha))
    }

    /// Distance to `other` up to scale and sign, both unit-normalized.
    pub fn distance_up_to_scale(&self, other: &EssentialMatrix) -> f64 {
        let (a, b) = (self.normalized().0, other.normalized().0);
        (a - b).norm().min((a + b).norm())
    }
}

/// Scale-free relative motion: `x_b = R x_a + s·t̂` for some `s > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    pub rotation: Mat3,
    pub translation_direction: Vec3,
}

/// `E = [t]× R` for the motion `x_b = R x_a + t`.
pub fn essential_from_pose(r: &Mat3, t: &Vec3) -> EssentialMatrix {
    EssentialMatrix(skew(t) * r)
}

/// First-order geometric (Sampson) distance of a correspondence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampsonError {
    pub distance: f64,
    /// Both epipolar-line gradients vanished; `distance` holds `|x_bᵀ E x_a|`.
    pub degenerate: bool,
}

pub fn sampson_error(e: &EssentialMatrix, xa: &Vec2, xb: &Vec2) -> SampsonError {
    let (ha, hb) = (xa.push(1.0), xb.push(1.0));
    let lb = e.0 * ha;
    let la = e.0.transpose() * hb;
    let r = hb.dot(&lb);
    let denom = lb.x * lb.x + lb.y * lb.y + la.x * la.x + la.y * la.y;
    if denom <= f64::MIN_POSITIVE {
        return SampsonError {
            distance: r.abs(),
            degenerate: true,
        };
    }
    SampsonError {
        distance: r.abs() / denom.sqrt(),
        degenerate: false,
    }
}

/// Closest essential matrix (singular values `(1, 1, 0)/√2`) to `m`.
pub fn project_to_essential(m: &Mat3) -> Option<EssentialMatrix> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let s = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0)) / 2f64.sqrt();
    Some(EssentialMatrix(u * s * v_t))
}

/// Linear least-squares essential matrix from ≥ 8 normalized pairs.
pub fn eight_point_essential(pairs: &[(Vec2, Vec2)]) -> Option<EssentialMatrix> {
    if pairs.len() < 8 {
        return None;
    }
    let mut a = DMatrix::<f64>::zeros(pairs.len().max(9), 9);
    for (i, (xa, xb)) in pairs.iter().enumerate() {
        let (ha, hb) = (xa.push(1.0), xb.push(1.0));
        for r in 0..3 {
            for c in 0..3 {
                a[(i, 3 * r + c)] = hb[r] * ha[c];
            }
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t?;
    let (imin, _) = svd.singular_values.argmin();
    let row = v_t.row(imin);
    let m = Matrix3::from_fn(|r, c| row[3 * r + c]);
    project_to_essential(&m)
}

/// Rotation best aligning bearings, `f_b ≈ R f_a` (Wahba's problem).
pub fn rotation_from_bearings(pairs: &[(Vec3, Vec3)]) -> Option<Mat3> {
    let mut h = Matrix3::zeros();
    for (fa, fb) in pairs {
        h += fa * fb.transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let v = v_t.transpose();
    let mut fix = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        fix[(2, 2)] = -1.0;
    }
    Some(v * fix * u.transpose())
}

/// Median residual angle (radians) below which a correspondence set is
/// treated as explained by rotation alone.
pub const PURE_ROTATION_PARALLAX: f64 = 4e-3;

/// Recovers `(R, t̂)` from `E` by cheirality voting over its four
/// factorizations.
pub fn decompose_essential(
    e: &EssentialMatrix,
    pairs: &[(Vec2, Vec2)],
) -> Result<RelativePose, GeometryError> {
    decompose_essential_with(e, pairs, PURE_ROTATION_PARALLAX)
}

pub fn decompose_essential_with(
    e: &EssentialMatrix,
    pairs: &[(Vec2, Vec2)],
    pure_rotation_parallax: f64,
) -> Result<RelativePose, GeometryError> {
    if pairs.is_empty() {
        return Err(GeometryError::InsufficientCorrespondences { needed: 1, got: 0 });
    }
    let bearings: Vec<(Vec3, Vec3)> = pairs
        .iter()
        .map(|(a, b)| (a.push(1.0).normalize(), b.push(1.0).normalize()))
        .collect();

    if pairs.len() >= 5 {
        if let Some(r) = rotation_from_bearings(&bearings) {
            let mut angles: Vec<f64> = bearings
                .iter()
                .map(|(fa, fb)| (r * fa).cross(fb).norm().atan2((r * fa).dot(fb)))
                .collect();
            angles.sort_by(|a, b| a.total_cmp(b));
            if angles[angles.len() / 2] < pure_rotation_parallax {
                return Err(GeometryError::PureRotationSuspected);
            }
        }
    }

    let svd = e.0.svd(true, true);
    let (mut u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v)) => (u, v),
        _ => return Err(GeometryError::DegenerateConfiguration("svd failed")),
    };
    let mut v = v_t.transpose();
    if u.determinant() < 0.0 {
        u = -u;
    }
    if v.determinant() < 0.0 {
        v = -v;
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let r1 = u * w * v.transpose();
    let r2 = u * w.transpose() * v.transpose();
    let t = u.column(2).into_owned().normalize();
    let candidates = [(r1, t), (r1, -t), (r2, t), (r2, -t)];

    let votes: Vec<usize> = candidates
        .iter()
        .map(|(r, t)| {
            bearings
                .iter()
                .filter(|(fa, fb)| positive_depths(r, t, fa, fb))
                .count()
        })
        .collect();
    let best = *votes.iter().max().unwrap();
    if best == 0 || votes.iter().filter(|&&v| v == best).count() > 1 {
        return Err(GeometryError::AmbiguousDecomposition);
    }
    let idx = votes.iter().position(|&v| v == best).unwrap();
    let (rotation, translation_direction) = candidates[idx];
    Ok(RelativePose {
        rotation,
        translation_direction,
    })
}

/// Depths `(λa, λb)` solving `λb f_b ≈ λa R f_a + t` in least squares.
fn positive_depths(r: &Mat3, t: &Vec3, fa: &Vec3, fb: &Vec3) -> bool {
    let rfa = r * fa;
    // [rfa, -fb] [λa, λb]ᵀ = -t
    let a11 = rfa.dot(&rfa);
    let a12 = -rfa.dot(fb);
    let a22 = fb.dot(fb);
    let b1 = -rfa.dot(t);
    let b2 = fb.dot(t);
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-15 {
        return false;
    }
    let la = (b1 * a22 - a12 * b2) / det;
    let lb = (a11 * b2 - a12 * b1) / det;
    la > 0.0 && lb > 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_error_deg;
    use nalgebra::{Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn motion(rng: &mut ChaCha8Rng) -> (Mat3, Vec3) {
        let r = Rotation3::from_euler_angles(
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
        )
        .into_inner();
        let t = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-0.3..0.3),
        );
        (r, t)
    }

    fn correspondences(rng: &mut ChaCha8Rng, r: &Mat3, t: &Vec3, n: usize) -> Vec<(Vec2, Vec2)> {
        let mut out = Vec::new();
        while out.len() < n {
            let pa = Vec3::new(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(2.0..6.0),
            );
            let pb = r * pa + t;
            if pb.z < 0.5 {
                continue;
            }
            out.push((pa.xy() / pa.z, pb.xy() / pb.z));
        }
        out
    }

    #[test]
    fn consistent_pair_has_zero_sampson() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (r, t) = motion(&mut rng);
        let e = essential_from_pose(&r, &t);
        for (a, b) in correspondences(&mut rng, &r, &t, 50) {
            assert!(sampson_error(&e, &a, &b).distance < 1e-12);
        }
    }

    /// Brute-force two-sided geometric distance: the smallest total
    /// displacement `sqrt(|a'−a|² + |b'−b|²)` with `b'ᵀ E a' = 0`. For a
    /// fixed `a'` the optimal `b'` is the foot of `b` on the line `E a'`, so
    /// only `a'` is searched, coarse to fine on a grid.
    fn geometric_distance(e: &EssentialMatrix, xa: &Vec2, xb: &Vec2) -> f64 {
        let cost = |ap: &Vec2| {
            let line = e.0 * ap.push(1.0);
            let d = xb.push(1.0).dot(&line).abs() / line.xy().norm();
            ((ap - xa).norm_squared() + d * d).sqrt()
        };
        let mut center = *xa;
        let mut radius = 2e-3;
        let mut best = cost(&center);
        for _ in 0..6 {
            let steps = 60;
            let mut best_p = center;
            for i in -steps..=steps {
                for j in -steps..=steps {
                    let p = center
                        + Vec2::new(i as f64, j as f64) * (radius / steps as f64);
                    let c = cost(&p);
                    if c < best {
                        best = c;
                        best_p = p;
                    }
                }
            }
            center = best_p;
            radius *= 4.0 / steps as f64;
        }
        best
    }

    #[test]
    fn perturbation_along_line_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (r, t) = motion(&mut rng);
            let e = essential_from_pose(&r, &t);
            let (a, b) = correspondences(&mut rng, &r, &t, 1)[0];
            let line = e.0 * a.push(1.0);
            let normal = line.xy().normalize();
            let bp = b + 1e-3 * normal;
            // the point-to-epipolar-line distance in image b is exactly 1e-3
            let point_line = (bp.push(1.0).dot(&line)).abs() / line.xy().norm();
            assert!((point_line - 1e-3).abs() < 1e-9);
            let s = sampson_error(&e, &a, &bp);
            assert!(!s.degenerate);
            let g = geometric_distance(&e, &a, &bp);
            assert!((s.distance - g).abs() < 0.1 * g, "{} vs {}", s.distance, g);
            // the two-sided distance never exceeds the one-sided one
            assert!(s.distance <= 1e-3 * 1.1);
        }
    }

    #[test]
    fn unrelated_pairs_exceed_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut above = 0;
        let total = 2000;
        for _ in 0..total {
            let (r, t) = motion(&mut rng);
            let e = essential_from_pose(&r, &t);
            let (r2, t2) = motion(&mut rng);
            let (a, b) = correspondences(&mut rng, &r2, &t2, 1)[0];
            if sampson_error(&e, &a, &b).distance > 5e-4 {
                above += 1;
            }
        }
        assert!(above as f64 / total as f64 > 0.95, "{above}");
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let e = EssentialMatrix(Mat3::zeros());
        let s = sampson_error(&e, &Vec2::new(0.1, 0.2), &Vec2::new(0.3, 0.1));
        assert!(s.degenerate);
        assert_eq!(s.distance, 0.0);
    }

    #[test]
    fn decomposition_recovers_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let (r, t) = motion(&mut rng);
            let e = essential_from_pose(&r, &t);
            let pairs = correspondences(&mut rng, &r, &t, 20);
            let rel = decompose_essential(&e, &pairs).unwrap();
            assert!((rel.rotation - r).norm() < 1e-8);
            assert!((rel.translation_direction - t.normalize()).norm() < 1e-8);
            assert!((rel.translation_direction.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn single_correspondence_selects_its_factorization() {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(0.2, 1.0, 0.1)), 0.2)
            .into_inner();
        let t = Vec3::new(1.0, 0.1, 0.05);
        let e = essential_from_pose(&r, &t);
        let pa = Vec3::new(0.1, -0.2, 3.0);
        let pb = r * pa + t;
        let pairs = [(pa.xy() / pa.z, pb.xy() / pb.z)];
        let rel = decompose_essential(&e, &pairs).unwrap();
        assert!(rotation_error_deg(&rel.rotation, &r) < 1e-6);
        assert!((rel.translation_direction - t.normalize()).norm() < 1e-8);
    }

    #[test]
    fn pure_rotation_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (r, _) = motion(&mut rng);
        let t = Vec3::new(1e-9, 0.0, 0.0);
        let pairs = correspondences(&mut rng, &r, &t, 30);
        let e = essential_from_pose(&r, &Vec3::x());
        assert_eq!(
            decompose_essential(&e, &pairs),
            Err(GeometryError::PureRotationSuspected)
        );
    }

    #[test]
    fn eight_point_recovers_exact_essential() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (r, t) = motion(&mut rng);
        let truth = essential_from_pose(&r, &t);
        let pairs = correspondences(&mut rng, &r, &t, 30);
        let e = eight_point_essential(&pairs).unwrap();
        assert!(e.distance_up_to_scale(&truth) < 1e-9);
        let (d, tr) = e.constraint_residuals();
        assert!(d < 1e-12 && tr < 1e-12);
    }
}
