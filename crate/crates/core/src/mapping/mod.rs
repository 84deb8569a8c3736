//! Semantic sparse map: class-labelled landmarks triangulated from frames
//! with known poses, keyframes, a flat visual vocabulary and tf-idf
//! retrieval through an inverted index.

mod build;
mod index;
mod vocabulary;

pub use build::{build_map, MapConfig};
pub use index::{query_candidates, query_candidates_exhaustive, InvertedIndex};
pub use vocabulary::{
    bow_similarity, bow_vector, build_vocabulary, train_vocabulary, BowVector, Vocabulary,
};

use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::Descriptor;
use crate::geometry::{Pose, Vec3};
use crate::semantics::{ClassId, ClassRegistry};

pub const MAP_FORMAT_VERSION: &str = "1";

#[derive(Debug, Error)]
pub enum MapError {
    #[error("empty map: no triangulable matches")]
    EmptyMap,
    #[error("need at least {needed} training descriptors, got {got}")]
    InsufficientTrainingData { needed: usize, got: usize },
    #[error("invalid map configuration: {0}")]
    InvalidConfig(String),
    #[error("map format version {found:?} is not supported (expected {expected:?})")]
    VersionMismatch { found: String, expected: String },
    #[error("map parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: u64,
    #[serde(rename = "p")]
    pub position: Vec3,
    #[serde(rename = "desc")]
    pub descriptor: Descriptor,
    /// Always present in semantic maps; may be absent in mask-free maps.
    pub class: Option<ClassId>,
    #[serde(rename = "obs")]
    pub observations: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub id: u64,
    #[serde(with = "pose_qt")]
    pub pose: Pose,
    pub landmarks: Vec<u64>,
    pub bow: BowVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMap {
    pub version: String,
    pub classes: ClassRegistry,
    /// Built from masked, labelled features only.
    pub semantic: bool,
    pub vocabulary: Vocabulary,
    pub landmarks: Vec<Landmark>,
    pub keyframes: Vec<Keyframe>,
    #[serde(skip)]
    index: InvertedIndex,
}

impl SparseMap {
    pub fn new(
        classes: ClassRegistry,
        semantic: bool,
        vocabulary: Vocabulary,
        landmarks: Vec<Landmark>,
        keyframes: Vec<Keyframe>,
    ) -> Self {
        let index = InvertedIndex::from_keyframes(&keyframes);
        Self {
            version: MAP_FORMAT_VERSION.to_string(),
            classes,
            semantic,
            vocabulary,
            landmarks,
            keyframes,
            index,
        }
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    /// Landmark by id (ids are dense and sorted at build time).
    pub fn landmark(&self, id: u64) -> Option<&Landmark> {
        match self.landmarks.get(id as usize) {
            Some(l) if l.id == id => Some(l),
            _ => self
                .landmarks
                .binary_search_by_key(&id, |l| l.id)
                .ok()
                .map(|i| &self.landmarks[i]),
        }
    }

    pub fn keyframe(&self, id: u64) -> Option<&Keyframe> {
        self.keyframes.iter().find(|k| k.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("map serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, MapError> {
        #[derive(Deserialize)]
        struct Probe {
            version: String,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.version != MAP_FORMAT_VERSION {
            return Err(MapError::VersionMismatch {
                found: probe.version,
                expected: MAP_FORMAT_VERSION.to_string(),
            });
        }
        let mut map: SparseMap = serde_json::from_str(text)?;
        map.index = InvertedIndex::from_keyframes(&map.keyframes);
        Ok(map)
    }
}

pub fn save_map(map: &SparseMap, path: impl AsRef<Path>) -> Result<(), MapError> {
    std::fs::write(path, map.to_json())?;
    Ok(())
}

pub fn load_map(path: impl AsRef<Path>) -> Result<SparseMap, MapError> {
    SparseMap::from_json(&std::fs::read_to_string(path)?)
}

/// `{"q": [qw, qx, qy, qz], "t": [x, y, z]}`.
pub(crate) mod pose_qt {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Qt {
        q: [f64; 4],
        t: [f64; 3],
    }

    pub fn serialize<S: Serializer>(p: &Pose, s: S) -> Result<S::Ok, S::Error> {
        let q = p.rotation.quaternion();
        Qt {
            q: [q.w, q.i, q.j, q.k],
            t: [p.translation.x, p.translation.y, p.translation.z],
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Pose, D::Error> {
        let qt = Qt::deserialize(d)?;
        let [w, x, y, z] = qt.q;
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !((n - 1.0).abs() < 1e-6) {
            return Err(serde::de::Error::custom("pose quaternion is not unit length"));
        }
        // stored quaternions are already unit; keep their bits
        Ok(Pose::new(
            UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z)),
            Vec3::from(qt.t),
        ))
    }
}
