use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{mode_features, mode_matches, PipelineParams, SemanticMode};
use crate::features::Descriptor;
use crate::frame::Frame;
use crate::geometry::{
    ransac_pnp, refine_pose, reprojection_error, CameraIntrinsics, PnpMatch, Pose, RefineStatus,
    Vec2,
};
use crate::mapping::{bow_vector, query_candidates, SparseMap};
use crate::semantics::ClassId;
use crate::simworld::derive_seed;

/// Query feature ↔ map landmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub feature: usize,
    pub landmark: u64,
    pub pixel: [f64; 2],
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub frame_id: u64,
    pub timestamp: f64,
    pub mode: SemanticMode,
    /// World-to-camera pose.
    pub pose: Option<Pose>,
    /// Inliers of the reported pose (all below the PnP threshold).
    pub inliers: Vec<Correspondence>,
    /// Pooled, deduplicated 2D–3D matches.
    pub total_matches: usize,
    pub candidates: Vec<u64>,
    pub refined: bool,
    /// Whether the map was built from labelled features only.
    pub map_semantic: bool,
    pub failure: Option<String>,
}

impl LocalizationResult {
    pub fn inlier_count(&self) -> usize {
        self.inliers.len()
    }
}

/// Relocalizes one frame against a map.
///
/// Features are extracted per mode, the `retrieval_candidates` most similar
/// keyframes are fetched, each is matched against the query, and the pooled
/// 2D–3D matches (one per landmark, then one per query feature, lowest ratio
/// kept) go through P3P RANSAC and Gauss–Newton refinement. Refinement that
/// does not lower the cost or loses inliers falls back to the RANSAC pose.
pub fn relocalize(
    map: &SparseMap,
    frame: &Frame,
    k: &CameraIntrinsics,
    mode: SemanticMode,
    params: &PipelineParams,
) -> LocalizationResult {
    let mut out = LocalizationResult {
        frame_id: frame.id,
        timestamp: frame.timestamp,
        mode,
        pose: None,
        inliers: Vec::new(),
        total_matches: 0,
        candidates: Vec::new(),
        refined: false,
        map_semantic: map.semantic,
        failure: None,
    };
    let fail = |mut o: LocalizationResult, why: String| {
        log::debug!("frame {}: {why}", o.frame_id);
        o.failure = Some(why);
        o
    };
    if map.landmarks.is_empty() || map.keyframes.is_empty() {
        return fail(out, "empty map".into());
    }
    let feats = mode_features(frame, mode, &params.extract);
    if mode != SemanticMode::Baseline && feats.labeled_count() == 0 {
        return fail(out, "no semantic features".into());
    }
    if feats.is_empty() {
        return fail(out, "no features".into());
    }
    let bow = bow_vector(&feats.descriptors, &map.vocabulary);
    let candidates = query_candidates(map, &bow, params.retrieval_candidates);
    out.candidates = candidates.iter().map(|c| c.0).collect();
    if candidates.is_empty() {
        return fail(out, "no candidates".into());
    }

    // landmark id → (ratio, feature)
    let mut by_landmark: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for (kf_id, _) in &candidates {
        let kf = map.keyframe(*kf_id).expect("retrieved keyframe exists");
        let lms: Vec<_> = kf.landmarks.iter().filter_map(|&id| map.landmark(id)).collect();
        let descs: Vec<Descriptor> = lms.iter().map(|l| l.descriptor.clone()).collect();
        let labels: Vec<Option<ClassId>> = lms.iter().map(|l| l.class).collect();
        let ms = mode_matches(
            mode,
            &feats.descriptors,
            &feats.labels,
            &descs,
            &labels,
            &params.classes,
            params.ratio,
        );
        for m in ms {
            let id = lms[m.train_index].id;
            let e = by_landmark.entry(id).or_insert((m.ratio, m.query_index));
            if (m.ratio, m.query_index) < *e {
                *e = (m.ratio, m.query_index);
            }
        }
    }
    let mut by_feature: BTreeMap<usize, (f64, u64)> = BTreeMap::new();
    for (&id, &(ratio, f)) in &by_landmark {
        let e = by_feature.entry(f).or_insert((ratio, id));
        if (ratio, id) < *e {
            *e = (ratio, id);
        }
    }
    let pooled: Vec<Correspondence> = by_feature
        .into_iter()
        .map(|(f, (ratio, landmark))| Correspondence {
            feature: f,
            landmark,
            pixel: [feats.keypoints[f].x, feats.keypoints[f].y],
            ratio,
        })
        .collect();
    out.total_matches = pooled.len();
    if pooled.len() < params.pnp.min_inliers.max(4) {
        return fail(
            out,
            format!("too few matches ({} < {})", pooled.len(), params.pnp.min_inliers.max(4)),
        );
    }
    let pnp: Vec<PnpMatch> = pooled
        .iter()
        .map(|c| PnpMatch {
            pixel: Vec2::new(c.pixel[0], c.pixel[1]),
            point: map.landmark(c.landmark).expect("pooled landmark").position,
        })
        .collect();
    let ransac = params.pnp.with_seed(derive_seed(params.seed, frame.id));
    let (pose0, inl0) = match ransac_pnp(&pnp, k, &ransac) {
        Ok(r) => r,
        Err(e) => return fail(out, format!("ransac failed: {e}")),
    };
    let thr = params.pnp.inlier_threshold;
    let inlier_set = |p: &Pose| -> Vec<usize> {
        (0..pnp.len())
            .filter(|&i| reprojection_error(p, k, &pnp[i]) < thr)
            .collect()
    };
    let subset: Vec<PnpMatch> = inl0.iter().map(|&i| pnp[i]).collect();
    let refined = refine_pose(&pose0, &subset, k, params.refine_iterations, params.refine_tolerance);
    let (pose, inl) = match refined.status {
        RefineStatus::Failed => (pose0, inl0),
        _ if !(refined.final_cost <= refined.initial_cost) => (pose0, inl0),
        _ => {
            let inl = inlier_set(&refined.pose);
            if inl.len() >= inl0.len() {
                out.refined = true;
                (refined.pose, inl)
            } else {
                (pose0, inl0)
            }
        }
    };
    if inl.len() < params.pnp.min_inliers {
        return fail(
            out,
            format!("too few inliers ({} < {})", inl.len(), params.pnp.min_inliers),
        );
    }
    out.pose = Some(pose);
    out.inliers = inl.into_iter().map(|i| pooled[i]).collect();
    out
}
