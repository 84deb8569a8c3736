//! Object classes, bounding-box providers, masking, keypoint labelling and
//! the two class-consistency mechanisms: per-class matching before
//! (`pre`) and class filtering after (`post`) unrestricted matching.

mod boxes;
mod classes;
mod consistency;

pub use boxes::{
    build_mask, label_keypoints, label_points, load_detections, parse_detections, BoundingBox,
    DetectionSet, DEFAULT_MIN_CONFIDENCE,
};
pub use classes::{ClassId, ClassRegistry, SemanticClass, NUM_CLASSES};
pub use consistency::{filter_matches_by_class, match_per_class};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown class name {0:?}")]
    UnknownClass(String),
    #[error("box {index}: {reason}")]
    InvalidBox { index: usize, reason: String },
    #[error("invalid class registry: {0}")]
    Registry(String),
}

impl From<serde_json::Error> for SemanticsError {
    fn from(e: serde_json::Error) -> Self {
        SemanticsError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}
