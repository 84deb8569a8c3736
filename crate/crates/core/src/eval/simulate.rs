use std::fs;
use std::path::Path;
use std::str::FromStr;

use ini::Ini;

use super::{synthesize, BenchmarkConfig, EvalError, PerturbationSpec};
use crate::geometry::{Pose, Vec3};
use crate::semantics::ClassRegistry;
use crate::simworld::{
    generate_trajectory, generate_world, ini_get, ini_list, write_dataset, DatasetPaths,
    TrajectoryKind, TrajectoryParams,
};

/// Which poses a simulated session follows.
#[derive(Debug, Clone, PartialEq)]
pub enum Session {
    /// The benchmark's mapping sweep.
    Mapping,
    /// The benchmark's evaluation yaw turn + forward run.
    Evaluation,
    Trajectory(TrajectoryKind, TrajectoryParams),
}

impl FromStr for Session {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mapping" => Ok(Self::Mapping),
            "evaluation" => Ok(Self::Evaluation),
            "trajectory" => Ok(Self::Trajectory(TrajectoryKind::Yaw, TrajectoryParams::default())),
            _ => Err(format!("unknown session '{s}' (expected mapping, evaluation or trajectory)")),
        }
    }
}

/// `simulate` input: the scene and benchmark sections plus `[simulate]`
/// (`session`, `perturbation`) and, for `session = trajectory`, a
/// `[trajectory]` section (`kind`, `center`, `heading`, `steps`, `sweep`,
/// `distance`, `t0`, `dt`).
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub bench: BenchmarkConfig,
    pub session: Session,
    pub perturbation: PerturbationSpec,
}

impl SimulateConfig {
    pub fn from_ini_str(text: &str) -> Result<Self, EvalError> {
        let bench = BenchmarkConfig::from_ini_str(text)?;
        let ini = Ini::load_from_str(text).map_err(|e| EvalError::Config(e.to_string()))?;
        let err = |e: crate::simworld::SimError| EvalError::Config(e.to_string());
        let mut session: Session = ini_get(&ini, "simulate", "session", Session::Mapping).map_err(err)?;
        if let Session::Trajectory(kind, params) = &mut session {
            let t = "trajectory";
            let d = TrajectoryParams::default();
            *kind = ini_get(&ini, t, "kind", *kind).map_err(err)?;
            let center: Vec<f64> = ini_list(&ini, t, "center", d.center.as_slice().to_vec()).map_err(err)?;
            let heading: Vec<f64> = ini_list(&ini, t, "heading", d.heading_deg.to_vec()).map_err(err)?;
            let (Ok(center), Ok(heading)) = (<[f64; 3]>::try_from(center), <[f64; 3]>::try_from(heading)) else {
                return Err(EvalError::Config("[trajectory] center and heading need three values".into()));
            };
            *params = TrajectoryParams {
                center: Vec3::from(center),
                heading_deg: heading,
                steps: ini_get(&ini, t, "steps", d.steps).map_err(err)?,
                sweep_deg: ini_get(&ini, t, "sweep", d.sweep_deg).map_err(err)?,
                distance: ini_get(&ini, t, "distance", d.distance).map_err(err)?,
                t0: ini_get(&ini, t, "t0", d.t0).map_err(err)?,
                dt: ini_get(&ini, t, "dt", d.dt).map_err(err)?,
            };
        }
        let perturbation = ini_get(&ini, "simulate", "perturbation", PerturbationSpec::None).map_err(err)?;
        Ok(Self { bench, session, perturbation })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        Self::from_ini_str(&fs::read_to_string(path)?)
    }

    pub fn poses(&self) -> Vec<(f64, Pose)> {
        match &self.session {
            Session::Mapping => self
                .bench
                .mapping_poses()
                .into_iter()
                .enumerate()
                .map(|(i, p)| (i as f64, p))
                .collect(),
            Session::Evaluation => self.bench.evaluation_poses(),
            Session::Trajectory(kind, params) => generate_trajectory(*kind, params),
        }
    }
}

/// Generates the world for `[world] seed`, applies the perturbation and
/// writes one session as a dataset directory.
pub fn simulate(cfg: &SimulateConfig, out: impl AsRef<Path>) -> Result<DatasetPaths, EvalError> {
    let stage = |name: &'static str| {
        move |e: crate::simworld::SimError| EvalError::Stage { stage: name.into(), message: e.to_string() }
    };
    let scene = &cfg.bench.scene;
    let world = generate_world(scene, scene.seed).map_err(stage("generate_world"))?;
    let world = cfg.perturbation.apply(&world).map_err(stage("perturb_world"))?;
    let stream = match cfg.session {
        Session::Mapping => 0x4D41_5050,
        _ => 0x4556_414C,
    };
    let frames = synthesize(&world, &cfg.poses(), &cfg.bench, stream);
    write_dataset(out, &world, &frames, &ClassRegistry::default(), &scene.camera).map_err(stage("write_dataset"))
}
