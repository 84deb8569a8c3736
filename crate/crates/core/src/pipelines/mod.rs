//! End-to-end estimators: map-based relocalization and pairwise relative
//! pose, each run in one of three semantic modes.

mod pairs;
mod relative;
mod relocalize;

pub use pairs::{most_similar, pair_selection, PairMethod};
pub use relative::{relative_pose, RelativePoseResult};
pub use relocalize::{relocalize, Correspondence, LocalizationResult};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::{knn_ratio_match, Match, DEFAULT_RATIO};
use crate::frame::{extract_features, ExtractConfig, FeatureSet, Frame};
use crate::geometry::RansacParams;
use crate::semantics::{filter_matches_by_class, match_per_class, ClassId, ClassRegistry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemanticMode {
    /// Unrestricted matching.
    Baseline,
    /// Mask before detection, match class by class.
    Pre,
    /// Unrestricted matching, then drop matches across classes.
    Post,
}

impl SemanticMode {
    pub const ALL: [SemanticMode; 3] = [Self::Baseline, Self::Pre, Self::Post];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Pre => "pre",
            Self::Post => "post",
        }
    }
}

impl fmt::Display for SemanticMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SemanticMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "pre" => Ok(Self::Pre),
            "post" => Ok(Self::Post),
            _ => Err(format!("unknown mode '{s}' (expected baseline, pre or post)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    /// Keyframes retrieved per query.
    pub retrieval_candidates: usize,
    pub ratio: f64,
    pub pnp: RansacParams,
    pub essential: RansacParams,
    pub refine_iterations: usize,
    pub refine_tolerance: f64,
    /// Base seed; each frame / pair derives its own stream from it.
    pub seed: u64,
    pub extract: ExtractConfig,
    pub classes: ClassRegistry,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            retrieval_candidates: 5,
            ratio: DEFAULT_RATIO,
            pnp: RansacParams::pnp(),
            essential: RansacParams {
                min_inliers: 5,
                ..RansacParams::essential()
            },
            refine_iterations: 20,
            refine_tolerance: 1e-10,
            seed: 0,
            extract: ExtractConfig::default(),
            classes: ClassRegistry::default(),
        }
    }
}

/// Mode-specific features of a frame: masked and label-only for `Pre`,
/// everything (still labelled) otherwise.
pub fn mode_features(frame: &Frame, mode: SemanticMode, extract: &ExtractConfig) -> FeatureSet {
    let mut fs = extract_features(frame, mode == SemanticMode::Pre, extract);
    if mode == SemanticMode::Pre {
        fs.retain_labeled();
    }
    fs
}

/// Descriptor matching under a mode. `Post` is exactly the baseline match
/// set with cross-class (and unlabelled) matches removed.
pub fn mode_matches(
    mode: SemanticMode,
    desc_a: &[crate::features::Descriptor],
    labels_a: &[Option<ClassId>],
    desc_b: &[crate::features::Descriptor],
    labels_b: &[Option<ClassId>],
    classes: &ClassRegistry,
    ratio: f64,
) -> Vec<Match> {
    match mode {
        SemanticMode::Baseline => knn_ratio_match(desc_a, desc_b, ratio),
        SemanticMode::Pre => match_per_class(desc_a, labels_a, desc_b, labels_b, classes.ids(), ratio),
        SemanticMode::Post => {
            filter_matches_by_class(&knn_ratio_match(desc_a, desc_b, ratio), labels_a, labels_b)
        }
    }
}
