use serde::{Deserialize, Serialize};

use super::{mode_features, mode_matches, PipelineParams, SemanticMode};
use crate::features::Match;
use crate::frame::Frame;
use crate::geometry::{
    decompose_essential, ransac_essential, rotation_from_bearings, CameraIntrinsics,
    GeometryError, Mat3, RelativePose, Vec2, Vec3, PURE_ROTATION_PARALLAX,
};
use crate::simworld::derive_seed;

/// Smallest-to-largest spread ratio below which triangulated inliers are
/// reported as (near) planar.
const PLANAR_RATIO: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativePoseResult {
    pub frame_a: u64,
    pub frame_b: u64,
    pub mode: SemanticMode,
    /// Maps camera-A coordinates to camera-B coordinates (unit or zero
    /// translation).
    #[serde(skip)]
    pub relative: Option<RelativePose>,
    pub matches: Vec<Match>,
    /// Pixel coordinates of each match, `(a, b)`.
    pub pixels: Vec<([f64; 2], [f64; 2])>,
    pub inliers: usize,
    pub pure_rotation: bool,
    pub planar_suspected: bool,
    pub failure: Option<String>,
}

impl RelativePoseResult {
    pub fn pixel_pairs(&self) -> Vec<(Vec2, Vec2)> {
        self.pixels
            .iter()
            .map(|(a, b)| (Vec2::new(a[0], a[1]), Vec2::new(b[0], b[1])))
            .collect()
    }
}

/// Stable per-pair seed stream.
fn pair_stream(a: u64, b: u64) -> u64 {
    a.wrapping_mul(0x1000_0000_01B3) ^ b.rotate_left(32)
}

fn bearing(x: &Vec2) -> Vec3 {
    x.push(1.0).normalize()
}

fn angle(r: &Mat3, fa: &Vec3, fb: &Vec3) -> f64 {
    let ra = r * fa;
    ra.cross(fb).norm().atan2(ra.dot(fb))
}

/// Rotation-only consensus: fit, keep the matches it explains to within a
/// few parallax thresholds, refit.
fn pure_rotation_model(norm: &[(Vec2, Vec2)]) -> Option<(Mat3, usize)> {
    let bearings: Vec<(Vec3, Vec3)> = norm.iter().map(|(a, b)| (bearing(a), bearing(b))).collect();
    let mut r = rotation_from_bearings(&bearings)?;
    let mut support = bearings.clone();
    for _ in 0..3 {
        support = bearings
            .iter()
            .filter(|(a, b)| angle(&r, a, b) < 5.0 * PURE_ROTATION_PARALLAX)
            .copied()
            .collect();
        if support.len() < 5 {
            return None;
        }
        r = rotation_from_bearings(&support)?;
    }
    let mut angles: Vec<f64> = support.iter().map(|(a, b)| angle(&r, a, b)).collect();
    angles.sort_by(f64::total_cmp);
    (angles[angles.len() / 2] < PURE_ROTATION_PARALLAX).then_some((r, support.len()))
}

fn planar(rel: &RelativePose, norm: &[(Vec2, Vec2)]) -> bool {
    // midpoint triangulation in camera A
    let pts: Vec<Vec3> = norm
        .iter()
        .filter_map(|(a, b)| {
            let (fa, fb) = (bearing(a), rel.rotation.transpose() * bearing(b));
            let cb = -(rel.rotation.transpose() * rel.translation_direction);
            let w = fa.cross(&fb);
            let d = w.norm_squared();
            if d < 1e-12 {
                return None;
            }
            let la = cb.cross(&fb).dot(&w) / d;
            let lb = cb.cross(&fa).dot(&w) / d;
            (la > 0.0 && lb > 0.0).then(|| (fa * la + cb + fb * lb) * 0.5)
        })
        .collect();
    if pts.len() < 4 {
        return false;
    }
    let mean = pts.iter().sum::<Vec3>() / pts.len() as f64;
    let cov = pts.iter().fold(Mat3::zeros(), |acc, p| {
        let d = p - mean;
        acc + d * d.transpose()
    });
    let ev = cov.symmetric_eigenvalues();
    let (lo, hi) = (ev.min(), ev.max());
    hi > 0.0 && (lo.max(0.0) / hi).sqrt() < PLANAR_RATIO
}

/// Relative pose of frame B with respect to frame A.
///
/// Matches are formed per mode, then five-point RANSAC on normalized
/// coordinates and cheirality decomposition. If the matches are explained
/// by a rotation alone, the rotation is returned with zero translation and
/// `pure_rotation` set.
pub fn relative_pose(
    a: &Frame,
    b: &Frame,
    k: &CameraIntrinsics,
    mode: SemanticMode,
    params: &PipelineParams,
) -> RelativePoseResult {
    let fa = mode_features(a, mode, &params.extract);
    let fb = mode_features(b, mode, &params.extract);
    let matches = mode_matches(
        mode,
        &fa.descriptors,
        &fa.labels,
        &fb.descriptors,
        &fb.labels,
        &params.classes,
        params.ratio,
    );
    let pixels: Vec<([f64; 2], [f64; 2])> = matches
        .iter()
        .map(|m| {
            let (p, q) = (fa.keypoints[m.query_index], fb.keypoints[m.train_index]);
            ([p.x, p.y], [q.x, q.y])
        })
        .collect();
    let mut out = RelativePoseResult {
        frame_a: a.id,
        frame_b: b.id,
        mode,
        relative: None,
        matches,
        pixels,
        inliers: 0,
        pure_rotation: false,
        planar_suspected: false,
        failure: None,
    };
    if out.matches.len() < 5 {
        out.failure = Some("insufficient matches".into());
        return out;
    }
    let norm: Vec<(Vec2, Vec2)> = out
        .pixel_pairs()
        .iter()
        .map(|(p, q)| (k.normalize(p), k.normalize(q)))
        .collect();
    let ransac = params
        .essential
        .with_seed(derive_seed(params.seed, pair_stream(a.id, b.id)));
    let pure = |out: &mut RelativePoseResult| -> bool {
        if let Some((r, support)) = pure_rotation_model(&norm) {
            out.pure_rotation = true;
            out.inliers = support;
            out.relative = Some(RelativePose {
                rotation: r,
                translation_direction: Vec3::zeros(),
            });
            true
        } else {
            false
        }
    };
    match ransac_essential(&norm, &ransac) {
        Ok((e, inl)) => {
            let subset: Vec<(Vec2, Vec2)> = inl.iter().map(|&i| norm[i]).collect();
            match decompose_essential(&e, &subset) {
                Ok(rel) => {
                    out.inliers = inl.len();
                    out.planar_suspected = planar(&rel, &subset);
                    out.relative = Some(rel);
                }
                Err(GeometryError::PureRotationSuspected) => {
                    if !pure(&mut out) {
                        out.pure_rotation = true;
                        out.failure = Some("pure rotation suspected".into());
                    }
                }
                Err(e) => out.failure = Some(format!("decomposition failed: {e}")),
            }
        }
        Err(e) => {
            if !pure(&mut out) {
                out.failure = Some(format!("ransac failed: {e}"));
            }
        }
    }
    if out.relative.is_some() && out.inliers < 5 {
        out.relative = None;
        out.failure = Some(format!("too few inliers ({})", out.inliers));
    }
    out
}
