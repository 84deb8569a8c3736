//! A frame as seen by the pipelines: either a grayscale image (features are
//! detected) or a set of already-observed keypoints with descriptors.

use serde::{Deserialize, Serialize};

use crate::features::{
    describe, detect_adaptive_with, Descriptor, HessianDetector, Image, Keypoint,
};
use crate::geometry::Pose;
use crate::semantics::{build_mask, label_keypoints, ClassId, DetectionSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedFeatures {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameSource {
    Image(Image),
    Observed(ObservedFeatures),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: u64,
    pub timestamp: f64,
    pub source: FrameSource,
    pub detections: DetectionSet,
    pub gt_pose: Option<Pose>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractConfig {
    pub min_features: usize,
    pub max_features: usize,
    pub detector: HessianDetector,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            min_features: 1000,
            max_features: 5000,
            detector: HessianDetector::default(),
        }
    }
}

/// Features of one frame with their class labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet {
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
    pub labels: Vec<Option<ClassId>>,
    /// Index of each feature in the frame's raw observation list (observed
    /// frames) or in the detector output (image frames).
    pub source: Vec<usize>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    /// Drops every feature without a class label.
    pub fn retain_labeled(&mut self) {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i].is_some()).collect();
        if keep.len() == self.len() {
            return;
        }
        *self = FeatureSet {
            keypoints: keep.iter().map(|&i| self.keypoints[i]).collect(),
            descriptors: keep.iter().map(|&i| self.descriptors[i].clone()).collect(),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            source: keep.iter().map(|&i| self.source[i]).collect(),
        };
    }
}

/// Extracts labelled features.
///
/// With `masked`, only pixels inside a detection box are used. For images the
/// pixels outside the boxes are zeroed before detection and description, so
/// neither ever sees unmasked content; for observed frames it is a keypoint
/// filter (observations are already detector output).
pub fn extract_features(frame: &Frame, masked: bool, cfg: &ExtractConfig) -> FeatureSet {
    let boxes = &frame.detections.boxes;
    match &frame.source {
        FrameSource::Image(img) => {
            let mask = masked.then(|| build_mask(img.width(), img.height(), boxes, None));
            let blanked = mask.as_ref().map(|m| {
                Image::from_fn(img.width(), img.height(), |x, y| {
                    if m.get(x as i64, y as i64) { img.get(x, y) } else { 0 }
                })
            });
            let img = blanked.as_ref().unwrap_or(img);
            let det = detect_adaptive_with(
                &cfg.detector,
                img,
                cfg.min_features,
                cfg.max_features,
                mask.as_ref(),
            );
            if det.range_unmet {
                log::debug!(
                    "frame {}: {} keypoints outside [{}, {}]",
                    frame.id,
                    det.keypoints.len(),
                    cfg.min_features,
                    cfg.max_features
                );
            }
            let d = describe(img, &det.keypoints);
            let keypoints: Vec<Keypoint> = d.kept.iter().map(|&i| det.keypoints[i]).collect();
            let labels = label_keypoints(&keypoints, boxes);
            FeatureSet {
                keypoints,
                descriptors: d.descriptors,
                labels,
                source: d.kept,
            }
        }
        FrameSource::Observed(obs) => {
            let labels = label_keypoints(&obs.keypoints, boxes);
            let keep: Vec<usize> = (0..obs.keypoints.len())
                .filter(|&i| !masked || labels[i].is_some())
                .collect();
            FeatureSet {
                keypoints: keep.iter().map(|&i| obs.keypoints[i]).collect(),
                descriptors: keep.iter().map(|&i| obs.descriptors[i].clone()).collect(),
                labels: keep.iter().map(|&i| labels[i]).collect(),
                source: keep,
            }
        }
    }
}
