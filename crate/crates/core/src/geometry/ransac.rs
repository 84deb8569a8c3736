use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    eight_point_essential, five_point_essential, p3p_solve, project, sampson_error,
    CameraIntrinsics, EssentialMatrix, GeometryError, Pose, Vec2, Vec3,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    pub max_iterations: usize,
    /// Pixels for reprojection, normalized-coordinate Sampson distance for
    /// epipolar scoring.
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    pub rng_seed: u64,
    /// Sampling stops early once an all-inlier sample has been drawn with
    /// this probability (given the best inlier ratio so far); 1 disables.
    pub confidence: f64,
}

pub const DEFAULT_CONFIDENCE: f64 = 0.999;

/// Iterations needed to draw one outlier-free `sample`-subset with
/// probability `confidence` when a fraction `w` of the data are inliers.
fn required_iterations(confidence: f64, w: f64, sample: i32) -> f64 {
    if confidence >= 1.0 {
        return f64::INFINITY;
    }
    let good = w.powi(sample);
    if good >= 1.0 {
        return 1.0;
    }
    if good <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 - confidence).ln() / (1.0 - good).ln()
}

impl RansacParams {
    pub fn pnp() -> Self {
        Self {
            max_iterations: 500,
            inlier_threshold: 3.0,
            min_inliers: 12,
            rng_seed: 0,
            confidence: DEFAULT_CONFIDENCE,
        }
    }

    pub fn essential() -> Self {
        Self {
            max_iterations: 1000,
            inlier_threshold: 5e-4,
            min_inliers: 15,
            rng_seed: 0,
            confidence: DEFAULT_CONFIDENCE,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    fn validate(&self) -> Result<(), GeometryError> {
        if self.max_iterations == 0 {
            return Err(GeometryError::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.confidence > 0.0 && self.confidence <= 1.0) {
            return Err(GeometryError::InvalidParameter(
                "confidence must be in (0, 1]".into(),
            ));
        }
        if !(self.inlier_threshold > 0.0) {
            return Err(GeometryError::InvalidParameter(
                "inlier_threshold must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A 2D keypoint (pixels) paired with a 3D landmark (world frame).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PnpMatch {
    pub pixel: Vec2,
    pub point: Vec3,
}

/// Pixel reprojection error; infinite when the landmark is behind the camera.
pub fn reprojection_error(pose: &Pose, k: &CameraIntrinsics, m: &PnpMatch) -> f64 {
    match project(pose, k, &m.point) {
        Ok(px) => (px - m.pixel).norm(),
        Err(_) => f64::INFINITY,
    }
}

fn pnp_inliers(pose: &Pose, k: &CameraIntrinsics, matches: &[PnpMatch], thr: f64) -> Vec<usize> {
    matches
        .iter()
        .enumerate()
        .filter(|(_, m)| reprojection_error(pose, k, m) < thr)
        .map(|(i, _)| i)
        .collect()
}

/// Four-point-sample RANSAC around P3P.
///
/// Each iteration draws four distinct matches, solves P3P on the first three
/// and keeps the solution that best reprojects the fourth. The pose with the
/// most inliers wins; earlier hypotheses win ties.
pub fn ransac_pnp(
    matches: &[PnpMatch],
    k: &CameraIntrinsics,
    params: &RansacParams,
) -> Result<(Pose, Vec<usize>), GeometryError> {
    params.validate()?;
    if matches.len() < 4 {
        return Err(GeometryError::InsufficientMatches {
            needed: 4,
            got: matches.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut best: Option<(Pose, usize)> = None;
    let mut needed = f64::INFINITY;
    for it in 0..params.max_iterations {
        if it as f64 >= needed {
            break;
        }
        let sample = index::sample(&mut rng, matches.len(), 4).into_vec();
        let bearings = [0, 1, 2].map(|i| k.bearing(&matches[sample[i]].pixel));
        let points = [0, 1, 2].map(|i| matches[sample[i]].point);
        let Ok(solutions) = p3p_solve(&bearings, &points) else {
            continue;
        };
        let fourth = &matches[sample[3]];
        let Some(pose) = solutions
            .into_iter()
            .map(|p| (reprojection_error(&p, k, fourth), p))
            .filter(|(e, _)| e.is_finite())
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, p)| p)
        else {
            continue;
        };
        let count = matches
            .iter()
            .filter(|m| reprojection_error(&pose, k, m) < params.inlier_threshold)
            .count();
        if best.as_ref().is_none_or(|(_, c)| count > *c) {
            best = Some((pose, count));
            if count == matches.len() {
                break;
            }
            needed = required_iterations(params.confidence, count as f64 / matches.len() as f64, 4);
        }
    }
    let (pose, count) = best.ok_or(GeometryError::LocalizationFailed {
        inliers: 0,
        required: params.min_inliers,
    })?;
    if count < params.min_inliers {
        return Err(GeometryError::LocalizationFailed {
            inliers: count,
            required: params.min_inliers,
        });
    }
    Ok((pose, pnp_inliers(&pose, k, matches, params.inlier_threshold)))
}

fn essential_inliers(e: &EssentialMatrix, pairs: &[(Vec2, Vec2)], thr: f64) -> Vec<usize> {
    pairs
        .iter()
        .enumerate()
        .filter(|(_, (a, b))| sampson_error(e, a, b).distance < thr)
        .map(|(i, _)| i)
        .collect()
}

/// Five-point RANSAC scored by Sampson distance, followed by a few rounds
/// of least-squares refitting on the consensus set.
pub fn ransac_essential(
    pairs: &[(Vec2, Vec2)],
    params: &RansacParams,
) -> Result<(EssentialMatrix, Vec<usize>), GeometryError> {
    params.validate()?;
    if pairs.len() < 5 {
        return Err(GeometryError::InsufficientCorrespondences {
            needed: 5,
            got: pairs.len(),
        });
    }
    let thr = params.inlier_threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut best: Option<(EssentialMatrix, usize)> = None;
    let mut needed = f64::INFINITY;
    for it in 0..params.max_iterations {
        if it as f64 >= needed {
            break;
        }
        let sample: Vec<(Vec2, Vec2)> = index::sample(&mut rng, pairs.len(), 5)
            .into_iter()
            .map(|i| pairs[i])
            .collect();
        let Ok(candidates) = five_point_essential(&sample) else {
            continue;
        };
        for e in candidates {
            let count = pairs
                .iter()
                .filter(|(a, b)| sampson_error(&e, a, b).distance < thr)
                .count();
            if best.as_ref().is_none_or(|(_, c)| count > *c) {
                best = Some((e, count));
                needed = required_iterations(params.confidence, count as f64 / pairs.len() as f64, 5);
            }
        }
        if best.as_ref().is_some_and(|(_, c)| *c == pairs.len()) {
            break;
        }
    }
    let (mut e, _) = best.ok_or(GeometryError::EstimationFailed {
        inliers: 0,
        required: params.min_inliers,
    })?;
    let mut inliers = essential_inliers(&e, pairs, thr);
    for _ in 0..5 {
        if inliers.len() < 8 {
            break;
        }
        let subset: Vec<(Vec2, Vec2)> = inliers.iter().map(|&i| pairs[i]).collect();
        let Some(refit) = eight_point_essential(&subset) else {
            break;
        };
        let refit_inliers = essential_inliers(&refit, pairs, thr);
        if refit_inliers.len() < inliers.len() {
            break;
        }
        let unchanged = refit_inliers == inliers;
        e = refit;
        inliers = refit_inliers;
        if unchanged {
            break;
        }
    }
    if inliers.len() < params.min_inliers {
        return Err(GeometryError::EstimationFailed {
            inliers: inliers.len(),
            required: params.min_inliers,
        });
    }
    Ok((e, inliers))
}
