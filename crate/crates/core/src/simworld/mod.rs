//! Deterministic synthetic module interior: class-labelled objects on the
//! walls of a rectangular prism, descriptor-carrying landmarks, camera
//! trajectories, scene-change perturbations and noisy observations.

mod config;
mod dataset;
mod render;
mod synth;
mod trajectory;
mod world;

pub use config::{NoiseModel, SceneConfig};
pub(crate) use config::{get as ini_get, get_list as ini_list};
pub use dataset::{read_frames_dir, write_dataset, DatasetPaths};
pub use render::{render_frame, render_image, RenderConfig};
pub use synth::{synthesize_frame, SyntheticFrame};
pub use trajectory::{generate_trajectory, TrajectoryKind, TrajectoryParams};
pub use world::{
    generate_world, perturb_world, Perturbation, PerturbationKind, Wall, World, WorldLandmark,
    WorldObject,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("could not place {what} after {tries} attempts")]
    Infeasible { what: String, tries: usize },
    #[error("invalid scene configuration: {0}")]
    Config(String),
    #[error("object {0} does not exist")]
    UnknownObject(u64),
    #[error("object {0} is not movable")]
    Immovable(u64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Trajectory(#[from] crate::trajectory::TrajectoryError),
}

/// splitmix64 of `seed` mixed with `stream`; used for per-frame and
/// per-stage random streams so parallel and serial runs agree.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
