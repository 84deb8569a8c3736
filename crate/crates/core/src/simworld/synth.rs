use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{NoiseModel, World};
use crate::features::{Descriptor, Keypoint};
use crate::frame::{Frame, FrameSource, ObservedFeatures};
use crate::geometry::{CameraIntrinsics, Pose, Vec2, Vec3};
use crate::mapping::pose_qt;
use crate::semantics::{BoundingBox, DetectionSet};

/// Points closer than this to the camera plane are not observed.
const NEAR: f64 = 0.05;
/// Scale reported for synthetic keypoints.
const KEYPOINT_SCALE: f64 = 1.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFrame {
    pub id: u64,
    pub timestamp: f64,
    #[serde(with = "pose_qt")]
    pub pose: Pose,
    pub keypoints: Vec<Keypoint>,
    pub descriptors: Vec<Descriptor>,
    pub boxes: Vec<BoundingBox>,
    /// Source landmark of each keypoint.
    pub landmark_ids: Vec<u64>,
}

impl SyntheticFrame {
    pub fn with_id(mut self, id: u64, timestamp: f64) -> Self {
        self.id = id;
        self.timestamp = timestamp;
        self
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn detections(&self) -> DetectionSet {
        DetectionSet {
            frame: self.id,
            boxes: self.boxes.clone(),
            ..Default::default()
        }
    }

    pub fn to_frame(&self) -> Frame {
        Frame {
            id: self.id,
            timestamp: self.timestamp,
            source: FrameSource::Observed(ObservedFeatures {
                keypoints: self.keypoints.clone(),
                descriptors: self.descriptors.clone(),
            }),
            detections: self.detections(),
            gt_pose: Some(self.pose),
        }
    }
}

// Pixel centres span [0, w−1]; staying inside keeps rounded keypoints on
// real pixels.
fn in_image(k: &CameraIntrinsics, px: &Vec2) -> bool {
    px.x >= 0.0 && px.y >= 0.0 && px.x <= (k.width - 1) as f64 && px.y <= (k.height - 1) as f64
}

/// Sutherland–Hodgman clip of a camera-frame polygon against `z ≥ NEAR`.
fn clip_near(poly: &[Vec3]) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (ina, inb) = (a.z >= NEAR, b.z >= NEAR);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let s = (NEAR - a.z) / (b.z - a.z);
            out.push(a + (b - a) * s);
        }
    }
    out
}

fn footprint_box(
    world: &World,
    obj: &super::WorldObject,
    pose: &Pose,
    k: &CameraIntrinsics,
    margin: f64,
) -> Option<BoundingBox> {
    let class = obj.class?;
    let cam: Vec<Vec3> = obj.corners(world.dims).iter().map(|c| pose.transform(c)).collect();
    let clipped = clip_near(&cam);
    if clipped.len() < 3 {
        return None;
    }
    let px: Vec<Vec2> = clipped
        .iter()
        .map(|p| Vec2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
        .collect();
    let fold = |f: fn(f64, f64) -> f64, init: f64, sel: fn(&Vec2) -> f64| {
        px.iter().map(sel).fold(init, f)
    };
    BoundingBox {
        class,
        x_min: fold(f64::min, f64::INFINITY, |p| p.x) - margin,
        y_min: fold(f64::min, f64::INFINITY, |p| p.y) - margin,
        x_max: fold(f64::max, f64::NEG_INFINITY, |p| p.x) + margin,
        y_max: fold(f64::max, f64::NEG_INFINITY, |p| p.y) + margin,
        confidence: 1.0,
    }
    .clamped(k.width, k.height)
}

/// Observes every landmark in front of the camera whose (noisy) projection
/// lands inside the image. Boxes are the clamped axis-aligned hulls of the
/// labelled objects' projected footprints, grown by the noise margin.
pub fn synthesize_frame<R: Rng + ?Sized>(
    world: &World,
    pose: &Pose,
    k: &CameraIntrinsics,
    noise: &NoiseModel,
    rng: &mut R,
) -> SyntheticFrame {
    let px_noise = (noise.pixel_sigma > 0.0).then(|| Normal::new(0.0, noise.pixel_sigma).unwrap());
    let desc_noise =
        (noise.descriptor_sigma > 0.0).then(|| Normal::new(0.0, noise.descriptor_sigma).unwrap());
    let mut frame = SyntheticFrame {
        id: 0,
        timestamp: 0.0,
        pose: *pose,
        keypoints: Vec::new(),
        descriptors: Vec::new(),
        boxes: Vec::new(),
        landmark_ids: Vec::new(),
    };
    for l in &world.landmarks {
        let pc = pose.transform(&l.position);
        if pc.z < NEAR {
            continue;
        }
        let mut px = Vec2::new(k.fx * pc.x / pc.z + k.cx, k.fy * pc.y / pc.z + k.cy);
        if !in_image(k, &px) {
            continue;
        }
        if let Some(n) = &px_noise {
            px += Vec2::new(n.sample(rng), n.sample(rng));
        }
        let mut d = l.descriptor.0.clone();
        if let Some(n) = &desc_noise {
            d.iter_mut().for_each(|v| *v += n.sample(rng));
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                d.iter_mut().for_each(|v| *v /= norm);
            }
        }
        if !in_image(k, &px) {
            continue;
        }
        frame.keypoints.push(Keypoint {
            x: px.x,
            y: px.y,
            response: 1.0,
            scale: KEYPOINT_SCALE,
        });
        frame.descriptors.push(Descriptor(d));
        frame.landmark_ids.push(l.id);
    }
    frame.boxes = footprint_boxes(world, pose, k, noise.box_margin);
    frame
}

pub(crate) fn footprint_boxes(world: &World, pose: &Pose, k: &CameraIntrinsics, margin: f64) -> Vec<BoundingBox> {
    world
        .objects
        .iter()
        .filter_map(|o| footprint_box(world, o, pose, k, margin))
        .collect()
}
