use std::fs;
use std::path::{Path, PathBuf};

use super::{SimError, SyntheticFrame, World};
use crate::features::Image;
use crate::frame::{Frame, FrameSource};
use crate::geometry::CameraIntrinsics;
use crate::semantics::{load_detections, ClassRegistry, DetectionSet, DEFAULT_MIN_CONFIDENCE};
use crate::trajectory::{write_tum, TrajectoryEntry};

/// Where [`write_dataset`] put things.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPaths {
    pub root: PathBuf,
    pub frames: PathBuf,
    pub annotations: PathBuf,
    pub gt_traj: PathBuf,
    pub world: PathBuf,
    pub intrinsics: PathBuf,
    pub classes: PathBuf,
}

impl DatasetPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        let root = root.into();
        Self {
            frames: root.join("frames"),
            annotations: root.join("annotations"),
            gt_traj: root.join("gt_traj.txt"),
            world: root.join("world.json"),
            intrinsics: root.join("intrinsics.json"),
            classes: root.join("classes.json"),
            root,
        }
    }
}

pub fn frame_file_name(id: u64) -> String {
    format!("{id:06}.json")
}

/// Layout:
/// `frames/<id>.json`, `annotations/<id>.json`, `gt_traj.txt` (TUM),
/// `world.json`, `intrinsics.json`, `classes.json`.
pub fn write_dataset(
    root: impl AsRef<Path>,
    world: &World,
    frames: &[SyntheticFrame],
    registry: &ClassRegistry,
    k: &CameraIntrinsics,
) -> Result<DatasetPaths, SimError> {
    let paths = DatasetPaths::new(root.as_ref());
    fs::create_dir_all(&paths.frames)?;
    fs::create_dir_all(&paths.annotations)?;
    for f in frames {
        let name = frame_file_name(f.id);
        fs::write(paths.frames.join(&name), serde_json::to_string(f)?)?;
        fs::write(
            paths.annotations.join(&name),
            f.detections().to_annotation_json(registry),
        )?;
    }
    let gt: Vec<TrajectoryEntry> = frames
        .iter()
        .map(|f| TrajectoryEntry::ok(f.timestamp, f.pose))
        .collect();
    write_tum(&paths.gt_traj, &gt)?;
    fs::write(&paths.world, world.to_json())?;
    fs::write(&paths.intrinsics, serde_json::to_string_pretty(k)?)?;
    fs::write(&paths.classes, serde_json::to_string_pretty(registry)?)?;
    Ok(paths)
}

/// Loads every `*.json` (synthetic observation) and `*.pgm` (image) file in
/// `frames_dir`, sorted by frame id. Boxes come from
/// `annotations_dir/<stem>.json` when that file exists; otherwise synthetic
/// frames keep their embedded boxes and images get none. Image frames take
/// their id from the numeric file stem and use it as the timestamp.
pub fn read_frames_dir(
    frames_dir: impl AsRef<Path>,
    annotations_dir: Option<&Path>,
    registry: &ClassRegistry,
    k: &CameraIntrinsics,
) -> Result<Vec<Frame>, SimError> {
    let mut files: Vec<PathBuf> = fs::read_dir(frames_dir.as_ref())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("json" | "pgm")))
        .collect();
    files.sort();
    let mut frames = Vec::with_capacity(files.len());
    for path in files {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let mut frame = if path.extension().is_some_and(|e| e == "json") {
            let synth: SyntheticFrame = serde_json::from_str(&fs::read_to_string(&path)?)?;
            synth.to_frame()
        } else {
            let id: u64 = stem
                .parse()
                .map_err(|_| SimError::Config(format!("image file stem '{stem}' is not a frame id")))?;
            let image = Image::read_pgm(&path)
                .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
            Frame {
                id,
                timestamp: id as f64,
                source: FrameSource::Image(image),
                detections: DetectionSet { frame: id, ..Default::default() },
                gt_pose: None,
            }
        };
        if let Some(dir) = annotations_dir {
            let ann = dir.join(format!("{stem}.json"));
            if ann.exists() {
                frame.detections =
                    load_detections(&ann, registry, k.width, k.height, DEFAULT_MIN_CONFIDENCE)
                        .map_err(|e| SimError::Config(format!("{}: {e}", ann.display())))?;
                frame.detections.frame = frame.id;
            }
        }
        frames.push(frame);
    }
    frames.sort_by_key(|f| f.id);
    Ok(frames)
}
