use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ini::Ini;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    absolute_errors, emit_report, evaluate_pair, sig6, success_rate, Alignment, EvalError,
    MatchEvalRecord, RatioFlag, ReportFormat, ReportRecord, DEFAULT_ASSOCIATION_WINDOW,
    DEFAULT_POS_TOL, DEFAULT_ROT_TOL_DEG,
};
use crate::frame::Frame;
use crate::geometry::{Pose, Vec3};
use crate::mapping::{bow_vector, build_map, BowVector, MapConfig, SparseMap};
use crate::pipelines::{
    mode_features, most_similar, relative_pose, relocalize, PipelineParams, SemanticMode,
};
use crate::simworld::{
    derive_seed, generate_trajectory, generate_world, ini_get, ini_list, perturb_world,
    synthesize_frame, Perturbation, SceneConfig, SimError, SyntheticFrame, TrajectoryKind,
    TrajectoryParams, World,
};
use crate::trajectory::{write_tum, TrajectoryEntry};

/// Scene change applied to the densest movable object between mapping and
/// evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbationSpec {
    None,
    /// Degrees about the wall normal.
    Rotate(f64),
    /// Meters along the wall.
    Translate(f64),
    Remove,
    /// With the next movable object.
    Swap,
}

impl PerturbationSpec {
    pub fn label(&self) -> String {
        match self {
            Self::None => "none".into(),
            Self::Rotate(d) => format!("rotate{d}"),
            Self::Translate(m) => format!("translate{m}"),
            Self::Remove => "remove".into(),
            Self::Swap => "swap".into(),
        }
    }

    /// The world seen at evaluation time.
    pub fn apply(&self, world: &World) -> Result<World, SimError> {
        let Some(target) = world.densest_movable_object().map(|o| o.id) else {
            return match self {
                Self::None => Ok(world.clone()),
                _ => Err(SimError::Config("no movable object to perturb".into())),
            };
        };
        let p = match *self {
            Self::None => return Ok(world.clone()),
            Self::Rotate(d) => Perturbation::rotate(target, d),
            Self::Translate(m) => Perturbation::translate(target, m),
            Self::Remove => Perturbation::remove(target),
            Self::Swap => {
                let other = world
                    .objects
                    .iter()
                    .find(|o| o.movable && o.id != target)
                    .ok_or_else(|| SimError::Config("swap needs two movable objects".into()))?;
                Perturbation::swap(target, other.id)
            }
        };
        perturb_world(world, &p)
    }
}

impl std::str::FromStr for PerturbationSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        let num = || arg.parse::<f64>().map_err(|_| format!("perturbation '{s}' needs a number"));
        match kind {
            "none" => Ok(Self::None),
            "rotate" => Ok(Self::Rotate(num()?)),
            "translate" => Ok(Self::Translate(num()?)),
            "remove" => Ok(Self::Remove),
            "swap" => Ok(Self::Swap),
            _ => Err(format!("unknown perturbation '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub scene: SceneConfig,
    pub seeds: Vec<u64>,
    pub modes: Vec<SemanticMode>,
    pub perturbations: Vec<PerturbationSpec>,
    /// Mapping stations along the module axis.
    pub map_stations: usize,
    /// Stations are visited at ± this lateral offset (meters).
    pub map_lateral_offset: f64,
    /// Evenly spaced headings captured at every mapping position.
    pub map_headings: usize,
    pub eval_yaw_steps: usize,
    pub eval_forward_steps: usize,
    /// Forward sequence length (meters).
    pub eval_forward_distance: f64,
    pub alignment: Alignment,
    pub pos_tol: f64,
    pub rot_tol_deg: f64,
    pub relpose: bool,
    pub map: MapConfig,
    pub pipeline: PipelineParams,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            scene: SceneConfig::default(),
            seeds: (0..10).collect(),
            modes: SemanticMode::ALL.to_vec(),
            perturbations: vec![PerturbationSpec::None, PerturbationSpec::Rotate(180.0)],
            map_stations: 5,
            map_lateral_offset: 0.25,
            map_headings: 8,
            eval_yaw_steps: 24,
            eval_forward_steps: 12,
            eval_forward_distance: 3.0,
            // the map lives in the ground-truth frame
            alignment: Alignment::None,
            pos_tol: DEFAULT_POS_TOL,
            rot_tol_deg: DEFAULT_ROT_TOL_DEG,
            relpose: true,
            map: MapConfig::default(),
            pipeline: PipelineParams::default(),
        }
    }
}

impl BenchmarkConfig {
    /// Scene sections plus an optional `[benchmark]` section.
    pub fn from_ini_str(text: &str) -> Result<Self, EvalError> {
        let ini = Ini::load_from_str(text).map_err(|e| EvalError::Config(e.to_string()))?;
        let scene = SceneConfig::from_ini(&ini).map_err(|e| EvalError::Config(e.to_string()))?;
        let d = Self::default();
        let b = "benchmark";
        let cfg_err = |e: SimError| EvalError::Config(e.to_string());
        let seeds = match ini.section(Some(b)).and_then(|s| s.get("seeds")) {
            Some(raw) if raw.contains("..") => {
                let (lo, hi) = raw.trim().split_once("..").unwrap();
                let (lo, hi): (u64, u64) = (
                    lo.trim().parse().map_err(|_| EvalError::Config(format!("bad seeds '{raw}'")))?,
                    hi.trim().parse().map_err(|_| EvalError::Config(format!("bad seeds '{raw}'")))?,
                );
                (lo..hi).collect()
            }
            _ => ini_list(&ini, b, "seeds", d.seeds.clone()).map_err(cfg_err)?,
        };
        let mut cfg = Self {
            seeds,
            modes: ini_list(&ini, b, "modes", d.modes.clone()).map_err(cfg_err)?,
            perturbations: ini_list(&ini, b, "perturbations", d.perturbations.clone()).map_err(cfg_err)?,
            map_stations: ini_get(&ini, b, "map_stations", d.map_stations).map_err(cfg_err)?,
            map_lateral_offset: ini_get(&ini, b, "map_lateral_offset", d.map_lateral_offset).map_err(cfg_err)?,
            map_headings: ini_get(&ini, b, "map_headings", d.map_headings).map_err(cfg_err)?,
            eval_yaw_steps: ini_get(&ini, b, "eval_yaw_steps", d.eval_yaw_steps).map_err(cfg_err)?,
            eval_forward_steps: ini_get(&ini, b, "eval_forward_steps", d.eval_forward_steps).map_err(cfg_err)?,
            eval_forward_distance: ini_get(&ini, b, "eval_forward_distance", d.eval_forward_distance)
                .map_err(cfg_err)?,
            alignment: ini_get(&ini, b, "alignment", d.alignment).map_err(cfg_err)?,
            pos_tol: ini_get(&ini, b, "pos_tol", d.pos_tol).map_err(cfg_err)?,
            rot_tol_deg: ini_get(&ini, b, "rot_tol", d.rot_tol_deg).map_err(cfg_err)?,
            relpose: ini_get(&ini, b, "relpose", d.relpose).map_err(cfg_err)?,
            map: d.map,
            pipeline: d.pipeline,
            scene,
        };
        cfg.map.vocabulary_k = ini_get(&ini, b, "vocabulary_k", cfg.map.vocabulary_k).map_err(cfg_err)?;
        cfg.pipeline.retrieval_candidates =
            ini_get(&ini, b, "retrieval_candidates", cfg.pipeline.retrieval_candidates).map_err(cfg_err)?;
        if cfg.seeds.is_empty() || cfg.modes.is_empty() || cfg.perturbations.is_empty() {
            return Err(EvalError::Config("seeds, modes and perturbations must be non-empty".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        Self::from_ini_str(&fs::read_to_string(path)?)
    }

    /// Mapping poses: every station at both lateral offsets, each turning
    /// through `map_headings` evenly spaced headings.
    pub fn mapping_poses(&self) -> Vec<Pose> {
        let l = self.scene.dims[0];
        let n = self.map_stations.max(1);
        let mut out = Vec::new();
        for s in 0..n {
            let x = l * (s as f64 + 0.5) / n as f64;
            for y in [self.map_lateral_offset, -self.map_lateral_offset] {
                let params = TrajectoryParams {
                    center: Vec3::new(x, y, 0.0),
                    steps: self.map_headings,
                    sweep_deg: 360.0,
                    ..TrajectoryParams::default()
                };
                out.extend(generate_trajectory(TrajectoryKind::Yaw, &params).into_iter().map(|p| p.1));
            }
        }
        out
    }

    /// Evaluation poses: a full yaw turn at the module centre, then a
    /// forward run along the axis slightly off-centre.
    pub fn evaluation_poses(&self) -> Vec<(f64, Pose)> {
        let [l, _, _] = self.scene.dims;
        let yaw = TrajectoryParams {
            center: Vec3::new(l / 2.0, 0.0, 0.0),
            heading_deg: [7.5, 0.0, 0.0],
            steps: self.eval_yaw_steps,
            sweep_deg: 360.0,
            t0: 0.0,
            dt: 1.0,
            ..TrajectoryParams::default()
        };
        let start = (l - self.eval_forward_distance) / 2.0;
        let fwd = TrajectoryParams {
            center: Vec3::new(start, 0.1, 0.05),
            steps: self.eval_forward_steps,
            distance: self.eval_forward_distance,
            t0: 1000.0,
            dt: 1.0,
            ..TrajectoryParams::default()
        };
        let mut out = generate_trajectory(TrajectoryKind::Yaw, &yaw);
        out.extend(generate_trajectory(TrajectoryKind::TranslateForward, &fwd));
        out
    }
}

/// Mapping-side products for one seed.
pub struct SeedMaps {
    pub world: World,
    pub frames: Vec<SyntheticFrame>,
    pub semantic: SparseMap,
    pub full: Option<SparseMap>,
}

fn stage<E: std::fmt::Display>(name: &str, seed: u64) -> impl Fn(E) -> EvalError + '_ {
    move |e| EvalError::Stage {
        stage: format!("{name} (seed {seed})"),
        message: e.to_string(),
    }
}

pub fn synthesize(world: &World, poses: &[(f64, Pose)], cfg: &BenchmarkConfig, stream: u64) -> Vec<SyntheticFrame> {
    poses
        .par_iter()
        .enumerate()
        .map(|(i, (t, p))| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(world.seed ^ stream, i as u64));
            synthesize_frame(world, p, &cfg.scene.camera, &cfg.scene.noise, &mut rng).with_id(i as u64, *t)
        })
        .collect()
}

pub fn build_seed_maps(cfg: &BenchmarkConfig, seed: u64) -> Result<SeedMaps, EvalError> {
    let world = generate_world(&cfg.scene, seed).map_err(stage("generate_world", seed))?;
    let poses: Vec<(f64, Pose)> = cfg
        .mapping_poses()
        .into_iter()
        .enumerate()
        .map(|(i, p)| (i as f64, p))
        .collect();
    let frames = synthesize(&world, &poses, cfg, 0x4D41_5050);
    let as_frames: Vec<Frame> = frames.iter().map(SyntheticFrame::to_frame).collect();
    let gt: Vec<Pose> = frames.iter().map(|f| f.pose).collect();
    let k = &cfg.scene.camera;
    let semantic = build_map(&as_frames, &gt, k, &MapConfig { semantic: true, ..cfg.map.clone() })
        .map_err(stage("build_map (semantic)", seed))?;
    let full = if cfg.modes.contains(&SemanticMode::Baseline) {
        Some(
            build_map(&as_frames, &gt, k, &MapConfig { semantic: false, ..cfg.map.clone() })
                .map_err(stage("build_map (full)", seed))?,
        )
    } else {
        None
    };
    Ok(SeedMaps { world, frames, semantic, full })
}

/// One (seed, scenario, mode) evaluation.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub scenario: String,
    pub mode: SemanticMode,
    pub record: ReportRecord,
    pub trajectory: Vec<TrajectoryEntry>,
    pub pairs: Vec<MatchEvalRecord>,
}

fn mean_defined(pairs: &[MatchEvalRecord]) -> f64 {
    let v: Vec<f64> = pairs
        .iter()
        .filter(|p| p.ratio_flag == RatioFlag::Ok)
        .map(|p| p.correct_ratio)
        .collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn run_seed(cfg: &BenchmarkConfig, seed: u64) -> Result<Vec<RunResult>, EvalError> {
    let maps = build_seed_maps(cfg, seed)?;
    let k = &cfg.scene.camera;
    let eval_poses = cfg.evaluation_poses();
    let params = PipelineParams { seed, ..cfg.pipeline.clone() };
    let mut out = Vec::new();
    let map_frames: Vec<Frame> = maps.frames.iter().map(SyntheticFrame::to_frame).collect();
    let map_bows: Vec<BowVector> = map_frames
        .iter()
        .map(|f| bow_vector(&mode_features(f, SemanticMode::Baseline, &params.extract).descriptors, &maps.semantic.vocabulary))
        .collect();
    for spec in &cfg.perturbations {
        let world = spec.apply(&maps.world).map_err(stage("perturb_world", seed))?;
        let eval = synthesize(&world, &eval_poses, cfg, 0x4556_414C);
        let frames: Vec<Frame> = eval.iter().map(SyntheticFrame::to_frame).collect();
        let gt: Vec<TrajectoryEntry> = eval.iter().map(|f| TrajectoryEntry::ok(f.timestamp, f.pose)).collect();
        // same pairs for every mode: nearest mapping frame by appearance
        let partners: Vec<Option<usize>> = frames
            .iter()
            .map(|f| {
                let bow = bow_vector(
                    &mode_features(f, SemanticMode::Baseline, &params.extract).descriptors,
                    &maps.semantic.vocabulary,
                );
                most_similar(&bow, &map_bows, None).filter(|(_, s)| *s > 0.0).map(|(j, _)| j)
            })
            .collect();
        for &mode in &cfg.modes {
            let map = match (mode, &maps.full) {
                (SemanticMode::Baseline, Some(full)) => full,
                _ => &maps.semantic,
            };
            let results: Vec<_> = frames
                .par_iter()
                .map(|f| relocalize(map, f, k, mode, &params))
                .collect();
            let trajectory: Vec<TrajectoryEntry> = results
                .iter()
                .map(|r| match r.pose {
                    Some(p) => TrajectoryEntry::ok(r.timestamp, p),
                    None => TrajectoryEntry::failed(r.timestamp, r.failure.clone().unwrap_or_default()),
                })
                .collect();
            let series = absolute_errors(&trajectory, &gt, cfg.alignment, DEFAULT_ASSOCIATION_WINDOW)
                .map_err(stage("absolute_errors", seed))?;
            let success = success_rate(&series, cfg.pos_tol, cfg.rot_tol_deg).map_err(stage("success_rate", seed))?;
            let pairs: Vec<MatchEvalRecord> = if cfg.relpose {
                frames
                    .par_iter()
                    .zip(&partners)
                    .filter_map(|(f, p)| p.map(|j| (f, j)))
                    .map(|(f, j)| {
                        let a = &map_frames[j];
                        let r = relative_pose(a, f, k, mode, &params);
                        evaluate_pair(
                            a.id,
                            f.id,
                            &r.pixel_pairs(),
                            r.relative.as_ref(),
                            r.pure_rotation,
                            &maps.frames[j].pose,
                            &eval[f.id as usize].pose,
                            k,
                        )
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let scenario = spec.label();
            out.push(RunResult {
                seed,
                scenario: scenario.clone(),
                mode,
                record: ReportRecord {
                    seq: format!("s{seed}_{scenario}"),
                    mode: mode.to_string(),
                    ape_max: series.ape_stats.max,
                    ape_median: series.ape_stats.median,
                    ape_rmse: series.ape_stats.rmse,
                    are_max: series.are_stats.max,
                    are_median: series.are_stats.median,
                    are_rmse: series.are_stats.rmse,
                    success_rate: success,
                    correct_match_ratio: mean_defined(&pairs),
                    ape_series: series.ape.clone(),
                    are_series: series.are.clone(),
                },
                trajectory,
                pairs,
            });
        }
    }
    Ok(out)
}

pub struct BenchmarkOutcome {
    pub runs: Vec<RunResult>,
    pub files: Vec<PathBuf>,
}

fn opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}

pub fn format_pairs_csv(runs: &[RunResult]) -> String {
    let mut s = String::from(
        "seq,mode,frame_a,frame_b,total_matches,correct_matches,correct_ratio,rotation_error_deg,heading_error_deg,success,pure_rotation\n",
    );
    for r in runs {
        for p in &r.pairs {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.record.seq,
                r.mode,
                p.frame_a,
                p.frame_b,
                p.total_matches,
                p.correct_matches,
                sig6(p.correct_ratio),
                opt(p.rotation_error_deg),
                opt(p.heading_error_deg),
                p.success,
                p.pure_rotation
            );
        }
    }
    s
}

/// Runs every seed (in parallel, results kept in seed order) and writes
/// `report.csv`, `report.json`, `pairs.csv`, CDF files and one estimated
/// trajectory per run under `out_dir`.
pub fn run_benchmark(cfg: &BenchmarkConfig, out_dir: impl AsRef<Path>) -> Result<BenchmarkOutcome, EvalError> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let per_seed: Vec<Result<Vec<RunResult>, EvalError>> =
        cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect();
    let mut runs = Vec::new();
    for r in per_seed {
        runs.extend(r?);
    }
    let records: Vec<ReportRecord> = runs.iter().map(|r| r.record.clone()).collect();
    let mut files = emit_report(&records, out_dir.join("report.csv"), ReportFormat::Csv)?;
    files.extend(emit_report(&records, out_dir.join("report.json"), ReportFormat::Json)?);
    let pairs = out_dir.join("pairs.csv");
    fs::write(&pairs, format_pairs_csv(&runs))?;
    files.push(pairs);
    let traj_dir = out_dir.join("trajectories");
    fs::create_dir_all(&traj_dir)?;
    for r in &runs {
        let p = traj_dir.join(format!("{}_{}.txt", r.record.seq, r.mode));
        write_tum(&p, &r.trajectory).map_err(|e| EvalError::Stage { stage: "write trajectory".into(), message: e.to_string() })?;
        files.push(p);
    }
    let gt = out_dir.join("gt_eval_traj.txt");
    let gt_entries: Vec<TrajectoryEntry> =
        cfg.evaluation_poses().into_iter().map(|(t, p)| TrajectoryEntry::ok(t, p)).collect();
    write_tum(&gt, &gt_entries).map_err(|e| EvalError::Stage { stage: "write trajectory".into(), message: e.to_string() })?;
    files.push(gt);
    files.sort();
    files.dedup();
    Ok(BenchmarkOutcome { runs, files })
}

/// Mean of a per-run quantity over the runs of one scenario and mode.
pub fn mean_over_seeds(runs: &[RunResult], scenario: &str, mode: SemanticMode, f: impl Fn(&RunResult) -> f64) -> f64 {
    let v: Vec<f64> = runs
        .iter()
        .filter(|r| r.scenario == scenario && r.mode == mode)
        .map(f)
        .filter(|x| x.is_finite())
        .collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}
