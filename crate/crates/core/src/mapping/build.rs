use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::{
    bow_similarity, bow_vector, train_vocabulary, Keyframe, Landmark, MapError, SparseMap,
};
use crate::features::{knn_ratio_match, Descriptor, Match, DEFAULT_RATIO};
use crate::frame::{extract_features, ExtractConfig, FeatureSet, Frame};
use crate::geometry::{triangulate_multiview, triangulate_two_view, CameraIntrinsics, Pose, Vec2};
use crate::semantics::{match_per_class, ClassId, ClassRegistry};

#[derive(Debug, Clone, PartialEq)]
pub struct MapConfig {
    /// Keep only features inside detection boxes (and drop unlabelled ones).
    pub semantic: bool,
    pub ratio: f64,
    pub max_reprojection_px: f64,
    /// Minimum angle between the two viewing rays of a new landmark.
    pub min_triangulation_angle_deg: f64,
    pub vocabulary_k: usize,
    pub vocabulary_seed: u64,
    /// Training descriptors beyond this are subsampled with a fixed stride.
    pub max_vocabulary_training: usize,
    /// Besides consecutive frames, each frame is matched against this many
    /// of its most similar frames.
    pub retrieval_neighbors: usize,
    pub extract: ExtractConfig,
    pub classes: ClassRegistry,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            semantic: true,
            ratio: DEFAULT_RATIO,
            max_reprojection_px: 2.0,
            min_triangulation_angle_deg: 1.0,
            vocabulary_k: 256,
            vocabulary_seed: 0,
            max_vocabulary_training: 20_000,
            retrieval_neighbors: 3,
            extract: ExtractConfig::default(),
            classes: ClassRegistry::default(),
        }
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    // smaller root wins so component representatives are deterministic
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

pub(crate) fn match_features(
    a: &FeatureSet,
    b: &FeatureSet,
    per_class: bool,
    classes: &ClassRegistry,
    ratio: f64,
) -> Vec<Match> {
    if per_class {
        match_per_class(&a.descriptors, &a.labels, &b.descriptors, &b.labels, classes.ids(), ratio)
    } else {
        knn_ratio_match(&a.descriptors, &b.descriptors, ratio)
    }
}

/// Builds a map from frames with known poses.
///
/// Features are extracted (inside detection boxes for a semantic map),
/// matched between consecutive and retrieval-selected frame pairs,
/// triangulated two-view, chained into tracks and re-triangulated over all
/// observations. Tracks that revisit a frame or fail the reprojection bound
/// are discarded.
pub fn build_map(
    frames: &[Frame],
    poses: &[Pose],
    k: &CameraIntrinsics,
    config: &MapConfig,
) -> Result<SparseMap, MapError> {
    if frames.len() != poses.len() {
        return Err(MapError::InvalidConfig(format!(
            "{} frames but {} poses",
            frames.len(),
            poses.len()
        )));
    }
    if frames.len() < 2 {
        return Err(MapError::InvalidConfig("map building needs at least two frames".into()));
    }
    let feats: Vec<FeatureSet> = frames
        .par_iter()
        .map(|f| {
            let mut fs = extract_features(f, config.semantic, &config.extract);
            if config.semantic {
                fs.retain_labeled();
            }
            fs
        })
        .collect();

    let total: usize = feats.iter().map(|f| f.len()).sum();
    if total < 2 {
        return Err(MapError::EmptyMap);
    }
    let descriptors: Vec<Vec<Descriptor>> = feats.iter().map(|f| f.descriptors.clone()).collect();
    let vocabulary = train_vocabulary(
        &descriptors,
        config.vocabulary_k,
        config.max_vocabulary_training,
        config.vocabulary_seed,
    )?;
    let bows: Vec<_> = feats.par_iter().map(|f| bow_vector(&f.descriptors, &vocabulary)).collect();

    // frame pairs to match
    let n = frames.len();
    let mut pairs: BTreeSet<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    for i in 0..n {
        let mut sims: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (bow_similarity(&bows[i], &bows[j]), j))
            .filter(|(s, _)| *s > 0.0)
            .collect();
        sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, j) in sims.iter().take(config.retrieval_neighbors) {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    let pairs: Vec<(usize, usize)> = pairs.into_iter().collect();

    let min_cos = config.min_triangulation_angle_deg.to_radians().cos();
    let edges: Vec<(usize, usize, usize, usize)> = pairs
        .par_iter()
        .flat_map_iter(|&(i, j)| {
            let ms = match_features(&feats[i], &feats[j], config.semantic, &config.classes, config.ratio);
            let (pa, pb) = (&poses[i], &poses[j]);
            let (ra, rb) = (pa.orientation(), pb.orientation());
            ms.into_iter()
                .filter_map(|m| {
                    let xa = kp_vec(&feats[i], m.query_index);
                    let xb = kp_vec(&feats[j], m.train_index);
                    let da = ra * k.bearing(&xa);
                    let db = rb * k.bearing(&xb);
                    if da.dot(&db) > min_cos {
                        return None;
                    }
                    let t = triangulate_two_view(pa, pb, &xa, &xb, k).ok()?;
                    (t.residual < config.max_reprojection_px)
                        .then_some((i, m.query_index, j, m.train_index))
                })
                .collect::<Vec<_>>()
        })
        .collect();

    // chain two-view matches into tracks
    let offsets: Vec<usize> = feats
        .iter()
        .scan(0, |acc, f| {
            let o = *acc;
            *acc += f.len();
            Some(o)
        })
        .collect();
    let mut dsu = Dsu((0..total).collect());
    for &(i, fi, j, fj) in &edges {
        dsu.union(offsets[i] + fi, offsets[j] + fj);
    }
    let mut tracks: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    let mut in_edge = vec![false; total];
    for &(i, fi, j, fj) in &edges {
        in_edge[offsets[i] + fi] = true;
        in_edge[offsets[j] + fj] = true;
    }
    for (fidx, f) in feats.iter().enumerate() {
        for feat in 0..f.len() {
            let node = offsets[fidx] + feat;
            if in_edge[node] {
                tracks.entry(dsu.find(node)).or_default().push((fidx, feat));
            }
        }
    }

    let candidates: Vec<Vec<(usize, usize)>> = tracks
        .into_values()
        .filter(|obs| {
            let frames_seen: BTreeSet<usize> = obs.iter().map(|o| o.0).collect();
            obs.len() >= 2 && frames_seen.len() == obs.len()
        })
        .collect();
    let built: Vec<Option<(Landmark, Vec<usize>)>> = candidates
        .par_iter()
        .map(|obs| {
            let views: Vec<(Pose, Vec2)> =
                obs.iter().map(|&(fi, f)| (poses[fi], kp_vec(&feats[fi], f))).collect();
            let t = triangulate_multiview(&views, k).ok()?;
            if !(t.residual < config.max_reprojection_px) {
                return None;
            }
            let dim = feats[obs[0].0].descriptors[obs[0].1].len();
            let mut mean = vec![0.0; dim];
            let mut votes: BTreeMap<ClassId, usize> = BTreeMap::new();
            for &(fi, f) in obs {
                mean.iter_mut()
                    .zip(&feats[fi].descriptors[f].0)
                    .for_each(|(m, v)| *m += v);
                if let Some(c) = feats[fi].labels[f] {
                    *votes.entry(c).or_default() += 1;
                }
            }
            let unlabeled = obs.len() - votes.values().sum::<usize>();
            let top = votes.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)));
            let class = match top {
                Some((&c, &count)) if count >= unlabeled => Some(c),
                _ => None,
            };
            if config.semantic && class.is_none() {
                return None;
            }
            Some((
                Landmark {
                    id: 0,
                    position: t.point,
                    descriptor: Descriptor::from_raw(mean),
                    class,
                    observations: obs.len() as u32,
                },
                obs.iter().map(|o| o.0).collect(),
            ))
        })
        .collect();

    let mut landmarks = Vec::new();
    let mut per_frame: Vec<Vec<u64>> = vec![Vec::new(); n];
    for (mut lm, seen_in) in built.into_iter().flatten() {
        lm.id = landmarks.len() as u64;
        for fi in seen_in {
            per_frame[fi].push(lm.id);
        }
        landmarks.push(lm);
    }
    if landmarks.is_empty() {
        return Err(MapError::EmptyMap);
    }
    let keyframes = frames
        .iter()
        .zip(poses)
        .zip(per_frame.into_iter().zip(bows))
        .map(|((f, p), (lms, bow))| Keyframe {
            id: f.id,
            pose: *p,
            landmarks: lms,
            bow,
        })
        .collect();
    log::info!(
        "built {} map: {} landmarks from {} frames ({} matched pairs)",
        if config.semantic { "semantic" } else { "full" },
        landmarks.len(),
        n,
        pairs.len()
    );
    Ok(SparseMap::new(config.classes.clone(), config.semantic, vocabulary, landmarks, keyframes))
}

fn kp_vec(f: &FeatureSet, i: usize) -> Vec2 {
    Vec2::new(f.keypoints[i].x, f.keypoints[i].y)
}
