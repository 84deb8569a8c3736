use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::geometry::{
    essential_from_pose, rotation_error_deg, sampson_error, translation_heading_error_deg,
    CameraIntrinsics, Mat3, Pose, RelativePose, Vec2, Vec3,
};
use crate::trajectory::TrajectoryEntry;

pub const DEFAULT_ASSOCIATION_WINDOW: f64 = 0.05;
pub const DEFAULT_POS_TOL: f64 = 0.3;
pub const DEFAULT_ROT_TOL_DEG: f64 = 5.0;
pub const CORRECT_MATCH_THRESHOLD: f64 = 5e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    None,
    /// Rigidly move the estimate so its first localized pose coincides with
    /// ground truth.
    #[default]
    FirstPose,
    /// Least-squares rigid fit of camera centres (no scale).
    UmeyamaNoScale,
}

impl std::str::FromStr for Alignment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "first_pose" => Ok(Self::FirstPose),
            "umeyama_no_scale" | "umeyama" => Ok(Self::UmeyamaNoScale),
            _ => Err(format!("unknown alignment '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregates {
    pub max: f64,
    pub median: f64,
    pub rmse: f64,
}

impl Aggregates {
    /// Zeros for an empty series.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        let rmse = (v.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
        Self { max: v[n - 1], median, rmse }
    }
}

/// Per-frame errors of the localized frames plus the number of frames that
/// were attempted (localized or not).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryErrorSeries {
    pub timestamps: Vec<f64>,
    /// Meters.
    pub ape: Vec<f64>,
    /// Degrees.
    pub are: Vec<f64>,
    pub ape_stats: Aggregates,
    pub are_stats: Aggregates,
    /// Associated frames including failures; the success-rate denominator.
    pub total_frames: usize,
}

fn associate(t: f64, gt: &[(f64, Pose)], window: f64) -> Option<Pose> {
    // gt sorted by time
    let i = gt.partition_point(|g| g.0 < t);
    [i.checked_sub(1), Some(i)]
        .into_iter()
        .flatten()
        .filter_map(|j| gt.get(j))
        .map(|g| ((g.0 - t).abs(), g.1))
        .filter(|(d, _)| *d <= window)
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|g| g.1)
}

/// Camera-to-world transform `(R, c)` of a world-to-camera pose.
fn c2w(p: &Pose) -> (Mat3, Vec3) {
    (p.rotation_matrix().transpose(), p.center())
}

/// World transform `(R, t)` taking estimated centres onto ground truth;
/// `None` when the centres are (nearly) collinear and the rotation about
/// their line is unconstrained.
fn umeyama(est: &[Vec3], gt: &[Vec3]) -> Option<(Mat3, Vec3)> {
    let n = est.len() as f64;
    let me = est.iter().sum::<Vec3>() / n;
    let mg = gt.iter().sum::<Vec3>() / n;
    let cov = est
        .iter()
        .zip(gt)
        .fold(Mat3::zeros(), |acc, (e, g)| acc + (g - mg) * (e - me).transpose());
    let svd = cov.svd(true, true);
    let mut sv = svd.singular_values;
    sv.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    if !(sv[1] > 1e-9 * sv[0]) {
        return None;
    }
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut s = Mat3::identity();
    if (u * v_t).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let r = u * s * v_t;
    Some((r, mg - r * me))
}

/// APE/ARE of every localized estimate against its nearest ground-truth
/// timestamp within `window`. Failed estimates only count towards
/// `total_frames`.
pub fn absolute_errors(
    est: &[TrajectoryEntry],
    gt: &[TrajectoryEntry],
    alignment: Alignment,
    window: f64,
) -> Result<TrajectoryErrorSeries, EvalError> {
    let mut gts: Vec<(f64, Pose)> = gt.iter().filter_map(|g| Some((g.timestamp, g.pose?))).collect();
    gts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0;
    let mut pairs: Vec<(f64, Pose, Pose)> = Vec::new();
    for e in est {
        let Some(g) = associate(e.timestamp, &gts, window) else {
            continue;
        };
        total += 1;
        if let Some(p) = e.pose {
            pairs.push((e.timestamp, p, g));
        }
    }
    if total == 0 {
        return Err(EvalError::NoAssociation);
    }
    let first_pose = || match pairs.first() {
        Some((_, e, g)) => {
            let ((re, ce), (rg, cg)) = (c2w(e), c2w(g));
            let r = rg * re.transpose();
            (r, cg - r * ce)
        }
        None => (Mat3::identity(), Vec3::zeros()),
    };
    let (ra, ta) = match alignment {
        Alignment::None => (Mat3::identity(), Vec3::zeros()),
        Alignment::FirstPose => first_pose(),
        // too few or collinear centres: fall back to the first pose
        Alignment::UmeyamaNoScale => {
            let ce: Vec<Vec3> = pairs.iter().map(|p| p.1.center()).collect();
            let cg: Vec<Vec3> = pairs.iter().map(|p| p.2.center()).collect();
            (pairs.len() >= 3).then(|| umeyama(&ce, &cg)).flatten().unwrap_or_else(first_pose)
        }
    };
    let mut out = TrajectoryErrorSeries {
        timestamps: Vec::with_capacity(pairs.len()),
        ape: Vec::with_capacity(pairs.len()),
        are: Vec::with_capacity(pairs.len()),
        ape_stats: Aggregates::default(),
        are_stats: Aggregates::default(),
        total_frames: total,
    };
    for (t, e, g) in &pairs {
        let ((re, ce), (rg, cg)) = (c2w(e), c2w(g));
        out.timestamps.push(*t);
        out.ape.push((ra * ce + ta - cg).norm());
        out.are.push(rotation_error_deg(&(ra * re), &rg));
    }
    out.ape_stats = Aggregates::of(&out.ape);
    out.are_stats = Aggregates::of(&out.are);
    Ok(out)
}

/// Fraction of attempted frames with APE < `pos_tol` and ARE < `rot_tol_deg`.
pub fn success_rate(series: &TrajectoryErrorSeries, pos_tol: f64, rot_tol_deg: f64) -> Result<f64, EvalError> {
    if series.total_frames == 0 {
        return Err(EvalError::EmptyTrajectory);
    }
    let ok = series
        .ape
        .iter()
        .zip(&series.are)
        .filter(|(p, r)| **p < pos_tol && **r < rot_tol_deg)
        .count();
    Ok(ok as f64 / series.total_frames as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioFlag {
    Ok,
    /// No matches; the ratio is reported as 0.
    Empty,
    /// Ground-truth baseline is zero, so the epipolar test is meaningless.
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchRatio {
    pub total: usize,
    pub correct: usize,
    pub ratio: f64,
    pub flag: RatioFlag,
}

/// Share of pixel correspondences whose Sampson error against the
/// ground-truth essential matrix is below `threshold`.
pub fn correct_match_ratio(
    pairs: &[(Vec2, Vec2)],
    gt_a: &Pose,
    gt_b: &Pose,
    k: &CameraIntrinsics,
    threshold: f64,
) -> MatchRatio {
    let rel = Pose::relative_to(gt_a, gt_b);
    if !(rel.translation.norm() > 1e-12) {
        return MatchRatio { total: pairs.len(), correct: 0, ratio: f64::NAN, flag: RatioFlag::Undefined };
    }
    if pairs.is_empty() {
        return MatchRatio { total: 0, correct: 0, ratio: 0.0, flag: RatioFlag::Empty };
    }
    let e = essential_from_pose(&rel.rotation_matrix(), &rel.translation.normalize());
    let correct = pairs
        .iter()
        .filter(|(a, b)| sampson_error(&e, &k.normalize(a), &k.normalize(b)).distance < threshold)
        .count();
    MatchRatio {
        total: pairs.len(),
        correct,
        ratio: correct as f64 / pairs.len() as f64,
        flag: RatioFlag::Ok,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchEvalRecord {
    pub frame_a: u64,
    pub frame_b: u64,
    pub total_matches: usize,
    pub correct_matches: usize,
    pub correct_ratio: f64,
    pub ratio_flag: RatioFlag,
    /// `None` when no pose was recovered.
    pub rotation_error_deg: Option<f64>,
    /// `None` without a pose or when either translation vanishes.
    pub heading_error_deg: Option<f64>,
    pub success: bool,
    pub pure_rotation: bool,
}

/// Scores a recovered relative pose (if any) and its matches against the
/// true poses of both frames.
pub fn evaluate_pair(
    frame_a: u64,
    frame_b: u64,
    pixels: &[(Vec2, Vec2)],
    estimate: Option<&RelativePose>,
    pure_rotation: bool,
    gt_a: &Pose,
    gt_b: &Pose,
    k: &CameraIntrinsics,
) -> MatchEvalRecord {
    let ratio = correct_match_ratio(pixels, gt_a, gt_b, k, CORRECT_MATCH_THRESHOLD);
    let rel = Pose::relative_to(gt_a, gt_b);
    let rotation_error_deg = estimate.map(|e| rotation_error_deg(&e.rotation, &rel.rotation_matrix()));
    let heading_error_deg = estimate
        .and_then(|e| translation_heading_error_deg(&e.translation_direction, &rel.translation).ok());
    MatchEvalRecord {
        frame_a,
        frame_b,
        total_matches: ratio.total,
        correct_matches: ratio.correct,
        correct_ratio: ratio.ratio,
        ratio_flag: ratio.flag,
        rotation_error_deg,
        heading_error_deg,
        success: estimate.is_some(),
        pure_rotation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    fn entry(t: f64, c: Vec3) -> TrajectoryEntry {
        TrajectoryEntry::ok(t, Pose::from_center(UnitQuaternion::identity(), c))
    }

    #[test]
    fn association_window_is_inclusive_and_nearest() {
        let gt = vec![entry(0.0, Vec3::zeros()), entry(1.0, Vec3::x())];
        let est = vec![entry(0.96, Vec3::x()), entry(0.5, Vec3::zeros())];
        let s = absolute_errors(&est, &gt, Alignment::None, 0.05).unwrap();
        assert_eq!(s.total_frames, 1);
        assert_eq!(s.ape, vec![0.0]);
    }

    #[test]
    fn no_association_is_an_error() {
        let gt = vec![entry(0.0, Vec3::zeros())];
        let est = vec![entry(5.0, Vec3::zeros())];
        assert!(matches!(absolute_errors(&est, &gt, Alignment::None, 0.05), Err(EvalError::NoAssociation)));
    }

    #[test]
    fn even_median_averages() {
        assert_eq!(Aggregates::of(&[1.0, 3.0]).median, 2.0);
    }
}
