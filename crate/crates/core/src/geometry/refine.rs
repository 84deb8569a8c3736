use nalgebra::{Matrix2x3, Matrix2x6, Matrix6, Vector6};

use super::{skew, CameraIntrinsics, GeometryError, PnpMatch, Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineStatus {
    Converged,
    MaxIterations,
    /// Normal equations were singular or the input was invalid; the initial
    /// pose is returned unchanged.
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOutcome {
    pub pose: Pose,
    pub status: RefineStatus,
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
}

/// Jacobian of the projected pixel with respect to the increment
/// `(δθ, δt)` applied by [`Pose::retract`].
pub fn reprojection_jacobian(
    pose: &Pose,
    k: &CameraIntrinsics,
    point: &Vec3,
) -> Result<Matrix2x6<f64>, GeometryError> {
    let pc = pose.transform(point);
    if pc.z <= 1e-9 {
        return Err(GeometryError::BehindCamera(pc.z));
    }
    let (x, y, z) = (pc.x, pc.y, pc.z);
    let dproj = Matrix2x3::new(
        k.fx / z,
        0.0,
        -k.fx * x / (z * z),
        0.0,
        k.fy / z,
        -k.fy * y / (z * z),
    );
    let mut j = Matrix2x6::zeros();
    j.fixed_view_mut::<2, 3>(0, 0).copy_from(&(dproj * -skew(&pc)));
    j.fixed_view_mut::<2, 3>(0, 3).copy_from(&dproj);
    Ok(j)
}

fn cost(pose: &Pose, k: &CameraIntrinsics, matches: &[PnpMatch]) -> f64 {
    matches
        .iter()
        .map(|m| match k.project_camera(&pose.transform(&m.point)) {
            Ok(px) => (px - m.pixel).norm_squared(),
            Err(_) => f64::INFINITY,
        })
        .sum()
}

/// Gauss–Newton on total squared reprojection error with a backtracking
/// step; a step is only accepted if it lowers the cost.
pub fn refine_pose(
    pose0: &Pose,
    matches: &[PnpMatch],
    k: &CameraIntrinsics,
    max_iters: usize,
    tol: f64,
) -> RefineOutcome {
    let initial_cost = cost(pose0, k, matches);
    let failed = RefineOutcome {
        pose: *pose0,
        status: RefineStatus::Failed,
        iterations: 0,
        initial_cost,
        final_cost: initial_cost,
    };
    if matches.len() < 4 || !initial_cost.is_finite() {
        return failed;
    }

    let mut pose = *pose0;
    let mut current = initial_cost;
    let mut status = RefineStatus::MaxIterations;
    let mut iterations = 0;
    for it in 0..max_iters {
        iterations = it + 1;
        let mut h = Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        for m in matches {
            let Ok(j) = reprojection_jacobian(&pose, k, &m.point) else {
                return failed;
            };
            let Ok(px) = k.project_camera(&pose.transform(&m.point)) else {
                return failed;
            };
            let r = px - m.pixel;
            h += j.transpose() * j;
            g += j.transpose() * r;
        }
        let eig = h.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        if !(hi > 0.0) || lo <= 1e-10 * hi {
            return RefineOutcome {
                iterations,
                ..failed
            };
        }
        let Some(chol) = h.cholesky() else {
            return RefineOutcome {
                iterations,
                ..failed
            };
        };
        let step = -chol.solve(&g);
        if step.norm() < tol {
            status = RefineStatus::Converged;
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let s = step * alpha;
            let cand = pose.retract(
                &Vec3::new(s[0], s[1], s[2]),
                &Vec3::new(s[3], s[4], s[5]),
            );
            let c = cost(&cand, k, matches);
            if c < current {
                pose = cand;
                current = c;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            status = RefineStatus::Converged;
            break;
        }
    }
    RefineOutcome {
        pose,
        status,
        iterations,
        initial_cost,
        final_cost: current,
    }
}
