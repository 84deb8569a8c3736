use std::path::Path;
use std::str::FromStr;

use ini::Ini;

use super::SimError;
use crate::geometry::CameraIntrinsics;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub pixel_sigma: f64,
    /// Per-component Gaussian σ before re-normalization.
    pub descriptor_sigma: f64,
    /// Ground-truth boxes are inflated by this many pixels.
    pub box_margin: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            pixel_sigma: 0.5,
            descriptor_sigma: 0.05,
            box_margin: 2.0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            pixel_sigma: 0.0,
            descriptor_sigma: 0.0,
            ..Self::default()
        }
    }
}

/// Scene description; every field has a default and can be overridden from
/// an INI file (`[world]`, `[camera]`, `[noise]` sections).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    /// Prism extent along x (length), y (width) and z (height), meters.
    pub dims: [f64; 3],
    pub objects_per_class: usize,
    pub landmarks_per_object: usize,
    /// Object footprint ranges (meters) along the two wall axes.
    pub object_size_min: [f64; 2],
    pub object_size_max: [f64; 2],
    /// Movable class ids (besides clutter, which is always movable).
    pub movable_classes: Vec<u8>,
    /// Unlabelled landmarks spread over all six faces.
    pub background_landmarks: usize,
    /// Unlabelled, movable, landmark-dense objects (the "flag" analog).
    pub clutter_objects: usize,
    pub clutter_landmarks: usize,
    pub clutter_size: [f64; 2],
    pub descriptor_dim: usize,
    pub descriptor_min_distance: f64,
    pub camera: CameraIntrinsics,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            dims: [6.0, 2.2, 2.2],
            objects_per_class: 3,
            landmarks_per_object: 24,
            object_size_min: [0.25, 0.2],
            object_size_max: [0.5, 0.4],
            movable_classes: vec![4, 5],
            background_landmarks: 600,
            clutter_objects: 1,
            clutter_landmarks: 200,
            clutter_size: [0.8, 0.6],
            descriptor_dim: 64,
            descriptor_min_distance: 0.8,
            camera: CameraIntrinsics {
                fx: 600.0,
                fy: 600.0,
                cx: 640.0,
                cy: 480.0,
                width: 1280,
                height: 960,
            },
            noise: NoiseModel::default(),
            seed: 1,
        }
    }
}

pub(crate) fn get<T: FromStr>(ini: &Ini, section: &str, key: &str, default: T) -> Result<T, SimError> {
    match ini.section(Some(section)).and_then(|s| s.get(key)) {
        None => Ok(default),
        Some(raw) => raw
            .trim()
            .parse()
            .map_err(|_| SimError::Config(format!("[{section}] {key} = {raw:?} is not valid"))),
    }
}

pub(crate) fn get_list<T: FromStr>(
    ini: &Ini,
    section: &str,
    key: &str,
    default: Vec<T>,
) -> Result<Vec<T>, SimError> {
    match ini.section(Some(section)).and_then(|s| s.get(key)) {
        None => Ok(default),
        Some(raw) => raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| SimError::Config(format!("[{section}] {key}: bad item {s:?}")))
            })
            .collect(),
    }
}

impl SceneConfig {
    pub fn from_ini(ini: &Ini) -> Result<Self, SimError> {
        let d = Self::default();
        let w = "world";
        let pair = |key: &str, def: [f64; 2]| -> Result<[f64; 2], SimError> {
            let v = get_list(ini, w, key, def.to_vec())?;
            v.try_into()
                .map_err(|_| SimError::Config(format!("[{w}] {key} needs two values")))
        };
        let cfg = Self {
            dims: [
                get(ini, w, "length", d.dims[0])?,
                get(ini, w, "width", d.dims[1])?,
                get(ini, w, "height", d.dims[2])?,
            ],
            objects_per_class: get(ini, w, "objects_per_class", d.objects_per_class)?,
            landmarks_per_object: get(ini, w, "landmarks_per_object", d.landmarks_per_object)?,
            object_size_min: pair("object_size_min", d.object_size_min)?,
            object_size_max: pair("object_size_max", d.object_size_max)?,
            movable_classes: get_list(ini, w, "movable_classes", d.movable_classes.clone())?,
            background_landmarks: get(ini, w, "background_landmarks", d.background_landmarks)?,
            clutter_objects: get(ini, w, "clutter_objects", d.clutter_objects)?,
            clutter_landmarks: get(ini, w, "clutter_landmarks", d.clutter_landmarks)?,
            clutter_size: pair("clutter_size", d.clutter_size)?,
            descriptor_dim: get(ini, w, "descriptor_dim", d.descriptor_dim)?,
            descriptor_min_distance: get(ini, w, "descriptor_min_distance", d.descriptor_min_distance)?,
            camera: CameraIntrinsics {
                fx: get(ini, "camera", "fx", d.camera.fx)?,
                fy: get(ini, "camera", "fy", d.camera.fy)?,
                cx: get(ini, "camera", "cx", d.camera.cx)?,
                cy: get(ini, "camera", "cy", d.camera.cy)?,
                width: get(ini, "camera", "width", d.camera.width)?,
                height: get(ini, "camera", "height", d.camera.height)?,
            },
            noise: NoiseModel {
                pixel_sigma: get(ini, "noise", "pixel_sigma", d.noise.pixel_sigma)?,
                descriptor_sigma: get(ini, "noise", "descriptor_sigma", d.noise.descriptor_sigma)?,
                box_margin: get(ini, "noise", "box_margin", d.noise.box_margin)?,
            },
            seed: get(ini, w, "seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_ini_str(text: &str) -> Result<Self, SimError> {
        let ini = Ini::load_from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        Self::from_ini(&ini)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        Self::from_ini_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.dims.iter().any(|v| !(*v > 0.0)) {
            return Err(SimError::Config("prism dimensions must be positive".into()));
        }
        self.camera
            .validate()
            .map_err(|e| SimError::Config(format!("camera: {e}")))?;
        if self.noise.pixel_sigma < 0.0 || self.noise.descriptor_sigma < 0.0 {
            return Err(SimError::Config("noise σ must be non-negative".into()));
        }
        if self.descriptor_dim < 2 {
            return Err(SimError::Config("descriptor_dim must be at least 2".into()));
        }
        for i in 0..2 {
            if !(self.object_size_min[i] > 0.0 && self.object_size_min[i] <= self.object_size_max[i]) {
                return Err(SimError::Config("object size range is empty".into()));
            }
        }
        Ok(())
    }
}
