//! Camera model, rigid transforms, minimal solvers, robust estimators and
//! pose-error metrics.
//!
//! Every routine here is a pure function of its inputs; random sampling is
//! driven by an explicit seed so results are reproducible across threads.

mod camera;
mod epipolar;
mod five_point;
mod metrics;
mod p3p;
mod poly;
mod pose;
mod ransac;
mod refine;
mod triangulation;

pub use camera::{project, CameraIntrinsics};
pub use epipolar::{
    decompose_essential, decompose_essential_with, essential_from_pose, eight_point_essential,
    project_to_essential, rotation_from_bearings, sampson_error, EssentialMatrix, RelativePose,
    SampsonError, PURE_ROTATION_PARALLAX,
};
pub use five_point::five_point_essential;
pub use metrics::{rotation_error_deg, translation_heading_error_deg};
pub use p3p::p3p_solve;
pub use pose::{skew, Pose};
pub use ransac::{
    ransac_essential, ransac_pnp, reprojection_error, PnpMatch, RansacParams, DEFAULT_CONFIDENCE,
};
pub use refine::{refine_pose, reprojection_jacobian, RefineOutcome, RefineStatus};
pub use triangulation::{triangulate_multiview, triangulate_two_view, Triangulated};

use thiserror::Error;

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point is behind the camera (depth {0})")]
    BehindCamera(f64),
    #[error("degenerate baseline between views")]
    DegenerateBaseline,
    #[error("cheirality failure: point behind a camera")]
    CheiralityFailure,
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(&'static str),
    #[error("insufficient correspondences: need {needed}, got {got}")]
    InsufficientCorrespondences { needed: usize, got: usize },
    #[error("insufficient matches: need {needed}, got {got}")]
    InsufficientMatches { needed: usize, got: usize },
    #[error("localization failed: best model has {inliers} inliers, need {required}")]
    LocalizationFailed { inliers: usize, required: usize },
    #[error("estimation failed: best model has {inliers} inliers, need {required}")]
    EstimationFailed { inliers: usize, required: usize },
    #[error("ambiguous decomposition: cheirality vote tie")]
    AmbiguousDecomposition,
    #[error("pure rotation suspected: translation is unobservable")]
    PureRotationSuspected,
    #[error("undefined heading: zero-length translation")]
    UndefinedHeading,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
