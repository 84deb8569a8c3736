use nalgebra::Matrix3;

use super::poly;
use super::{GeometryError, Pose, Vec3};

/// Minimal absolute pose from three bearing/world-point pairs.
///
/// The depth ratios `v = d3/d1`, `u = d2/d1` are eliminated from the three
/// law-of-cosines constraints into a quartic in `v` (the classical
/// Grunert/Gao complete-solution route). Each real root is back-substituted,
/// the three depths are polished with Newton steps on the original
/// constraints, and the pose follows from aligning the two point triads.
///
/// Returns every pose (at most four) that maps each world point onto its
/// bearing ray; the list may be empty.
pub fn p3p_solve(bearings: &[Vec3; 3], points: &[Vec3; 3]) -> Result<Vec<Pose>, GeometryError> {
    let [p1, p2, p3] = points;
    let area = 0.5 * (p2 - p1).cross(&(p3 - p1)).norm();
    if area <= 1e-9 {
        return Err(GeometryError::DegenerateConfiguration("collinear world points"));
    }
    let f: Vec<Vec3> = bearings.iter().map(|b| b.normalize()).collect();
    if f.iter().any(|b| !b.iter().all(|x| x.is_finite())) {
        return Err(GeometryError::DegenerateConfiguration("invalid bearing"));
    }

    let a2 = (p2 - p3).norm_squared();
    let b2 = (p1 - p3).norm_squared();
    let c2 = (p1 - p2).norm_squared();
    let ca = f[1].dot(&f[2]);
    let cb = f[0].dot(&f[2]);
    let cg = f[0].dot(&f[1]);
    let k1 = a2 / b2;
    let k2 = c2 / b2;
    let kd = k1 - k2;

    // u = N(v) / D(v);  (u² − 2u cγ + 1 − K2 Q(v)) D² = 0
    let q = [1.0, -2.0 * cb, 1.0];
    let n = [1.0 + kd, -2.0 * kd * cb, kd - 1.0];
    let d = [2.0 * cg, -2.0 * ca];
    let nn = poly::mul(&n, &n);
    let nd = poly::scale(&poly::mul(&n, &d), -2.0 * cg);
    let one_minus = poly::add(&[1.0], &poly::scale(&q, -k2));
    let rest = poly::mul(&one_minus, &poly::mul(&d, &d));
    let quartic = poly::add(&poly::add(&nn, &nd), &rest);

    let dist2 = [c2, b2, a2]; // pairs (0,1), (0,2), (1,2)
    let mut poses: Vec<Pose> = Vec::new();
    for v in poly::real_roots(&quartic) {
        if v <= 0.0 {
            continue;
        }
        let qv = poly::eval(&q, v);
        let dv = poly::eval(&d, v);
        let mut us: Vec<f64> = Vec::with_capacity(2);
        if dv.abs() > 1e-10 {
            us.push(poly::eval(&n, v) / dv);
        } else {
            // D(v) ≈ 0: solve the second constraint directly for u
            let c0 = 1.0 - k2 * qv;
            let disc = cg * cg - c0;
            if disc >= 0.0 {
                us.push(cg + disc.sqrt());
                us.push(cg - disc.sqrt());
            }
        }
        for u in us {
            if u <= 0.0 || qv <= 0.0 {
                continue;
            }
            let s = (b2 / qv).sqrt();
            let depths = polish_depths([s, u * s, v * s], &f, &dist2);
            if depths.iter().any(|x| *x <= 0.0 || !x.is_finite()) {
                continue;
            }
            let cam = [depths[0] * f[0], depths[1] * f[1], depths[2] * f[2]];
            let Some(pose) = align_triads(points, &cam) else {
                continue;
            };
            if !consistent(&pose, &f, points) {
                continue;
            }
            let dup = poses.iter().any(|p| {
                (p.translation - pose.translation).norm() < 1e-9
                    && p.rotation.angle_to(&pose.rotation) < 1e-9
            });
            if !dup {
                poses.push(pose);
            }
        }
    }
    Ok(poses)
}

const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

// |dᵢfᵢ − dⱼfⱼ|² − sᵢⱼ²: algebraically the law-of-cosines residual, but free
// of the cancellation in `1 − cos` for nearly parallel bearings.
fn residuals(d: &[f64; 3], f: &[Vec3], dist2: &[f64; 3]) -> Vec3 {
    Vec3::from_fn(|k, _| {
        let (i, j) = PAIRS[k];
        (d[i] * f[i] - d[j] * f[j]).norm_squared() - dist2[k]
    })
}

fn polish_depths(mut d: [f64; 3], f: &[Vec3], dist2: &[f64; 3]) -> [f64; 3] {
    let mut r = residuals(&d, f, dist2);
    for _ in 0..10 {
        let mut jac = Matrix3::zeros();
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            let diff = d[i] * f[i] - d[j] * f[j];
            jac[(k, i)] = 2.0 * diff.dot(&f[i]);
            jac[(k, j)] = -2.0 * diff.dot(&f[j]);
        }
        let Some(step) = jac.lu().solve(&r) else {
            break;
        };
        let cand = [d[0] - step[0], d[1] - step[1], d[2] - step[2]];
        let rc = residuals(&cand, f, dist2);
        if rc.norm() < r.norm() {
            d = cand;
            r = rc;
        } else {
            break;
        }
    }
    d
}

/// Rigid transform taking the world triad onto the camera triad.
///
/// Both triads are congruent after the depth polish, so an orthonormal frame
/// is spanned on each (longest edge first) and the frames are matched. Unlike
/// an SVD of the cross-covariance this stays exact for thin triangles.
fn align_triads(world: &[Vec3; 3], cam: &[Vec3; 3]) -> Option<Pose> {
    let edge = |(i, j): (usize, usize)| (world[j] - world[i]).norm_squared();
    let (i, j) = PAIRS.into_iter().max_by(|a, b| edge(*a).total_cmp(&edge(*b)))?;
    let k = 3 - i - j;
    let frame = |p: &[Vec3; 3]| -> Option<Matrix3<f64>> {
        let e1 = (p[j] - p[i]).try_normalize(1e-12)?;
        let w = p[k] - p[i];
        let e2 = (w - e1 * e1.dot(&w)).try_normalize(1e-12)?;
        Some(Matrix3::from_columns(&[e1, e2, e1.cross(&e2)]))
    };
    let r = frame(cam)? * frame(world)?.transpose();
    let cw = (world[0] + world[1] + world[2]) / 3.0;
    let cc = (cam[0] + cam[1] + cam[2]) / 3.0;
    Some(Pose::from_matrix(&r, cc - r * cw))
}

fn consistent(pose: &Pose, bearings: &[Vec3], points: &[Vec3; 3]) -> bool {
    bearings.iter().zip(points).all(|(b, p)| {
        let pc = pose.transform(p);
        pc.z > 0.0 && pc.normalize().cross(b).norm() < 1e-6
    })
}
