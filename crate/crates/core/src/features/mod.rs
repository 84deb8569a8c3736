//! Grayscale images, blob detection with an adaptive threshold, patch
//! descriptors and exact nearest-neighbour matching with the ratio test.

mod describe;
mod detect;
mod image;
mod matching;

pub use describe::{describe, describe_with, DescribeOutput, DESCRIPTOR_LEN};
pub use detect::{
    detect, detect_adaptive, detect_adaptive_with, detect_with, AdaptiveDetection, HessianDetector,
    KeypointDetector,
};
pub use image::{Image, Mask};
pub use matching::{knn_ratio_match, Match, DEFAULT_RATIO};

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("buffer of {got} bytes does not match a {width}x{height} image")]
    BufferSize { width: u32, height: u32, got: usize },
    #[error("image decode failed: {0}")]
    Decode(String),
    #[error("only 8-bit grayscale images are supported")]
    UnsupportedFormat,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub response: f64,
    /// Patch radius in pixels used by the descriptor.
    pub scale: f64,
}

/// Unit-length float descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Descriptor(pub Vec<f64>);

impl Descriptor {
    /// Normalizes `v`; an all-zero vector maps to the uniform unit vector so
    /// every descriptor stays on the sphere.
    pub fn from_raw(mut v: Vec<f64>) -> Self {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            v.iter_mut().for_each(|x| *x /= n);
        } else {
            let u = 1.0 / (v.len().max(1) as f64).sqrt();
            v.iter_mut().for_each(|x| *x = u);
        }
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn distance_squared(&self, other: &Descriptor) -> f64 {
        // four independent accumulators so the loop vectorizes
        let (a, b) = (&self.0, &other.0);
        let n = a.len().min(b.len());
        let mut acc = [0.0f64; 4];
        let (ca, cb) = (a[..n].chunks_exact(4), b[..n].chunks_exact(4));
        let (ra, rb) = (ca.remainder(), cb.remainder());
        for (x, y) in ca.zip(cb) {
            for l in 0..4 {
                let d = x[l] - y[l];
                acc[l] += d * d;
            }
        }
        let tail: f64 = ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum();
        (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
    }

    pub fn distance(&self, other: &Descriptor) -> f64 {
        self.distance_squared(other).sqrt()
    }
}

#[derive(Serialize)]
struct FeatureLine<'a> {
    index: usize,
    x: f64,
    y: f64,
    response: f64,
    scale: f64,
    desc: &'a [f64],
}

/// Writes one JSON object per feature (debug export).
pub fn write_features_jsonl<W: Write>(
    mut out: W,
    keypoints: &[Keypoint],
    descriptors: &[Descriptor],
) -> Result<(), FeatureError> {
    for (index, (kp, d)) in keypoints.iter().zip(descriptors).enumerate() {
        let line = FeatureLine {
            index,
            x: kp.x,
            y: kp.y,
            response: kp.response,
            scale: kp.scale,
            desc: &d.0,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
