use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use semloc::eval::{
    absolute_errors, emit_report, evaluate_pair, mean_over_seeds, run_benchmark, sig6, simulate,
    success_rate, Alignment, BenchmarkConfig, ReportFormat, ReportRecord, SimulateConfig,
    DEFAULT_ASSOCIATION_WINDOW,
};
use semloc::frame::Frame;
use semloc::geometry::{CameraIntrinsics, Pose};
use semloc::mapping::{bow_vector, build_map, load_map, save_map, train_vocabulary, MapConfig};
use semloc::pipelines::{
    mode_features, pair_selection, relative_pose, relocalize, PairMethod, PipelineParams,
    SemanticMode,
};
use semloc::semantics::ClassRegistry;
use semloc::simworld::read_frames_dir;
use semloc::trajectory::{read_tum, write_tum, TrajectoryEntry};

#[derive(Parser)]
#[command(name = "semloc", version, about = "Semantic class-consistent relocalization and relative pose toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic world and write one session as a dataset.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a landmark map from frames with known poses.
    BuildMap {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Defaults to intrinsics.json next to the frames directory.
        #[arg(long)]
        intrinsics: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Keep only features inside detection boxes.
        #[arg(long)]
        semantic: bool,
        /// TUM trajectory with the frame poses (defaults to the poses stored
        /// in synthetic frames).
        #[arg(long)]
        poses: Option<PathBuf>,
        #[arg(long)]
        classes: Option<PathBuf>,
    },
    /// Localize every frame against a map; writes a TUM trajectory.
    Relocalize {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Defaults to intrinsics.json next to the frames directory.
        #[arg(long)]
        intrinsics: Option<PathBuf>,
        #[arg(long, default_value = "post")]
        mode: SemanticMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pair each frame with its most similar frame and estimate relative poses.
    Relpose {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        intrinsics: Option<PathBuf>,
        #[arg(long)]
        classes: Option<PathBuf>,
        #[arg(long, default_value = "post")]
        mode: SemanticMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an estimated trajectory against ground truth.
    Evaluate {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        pos_tol: f64,
        #[arg(long, default_value_t = 5.0)]
        rot_tol: f64,
        #[arg(long, default_value = "first_pose")]
        alignment: Alignment,
        #[arg(long, default_value_t = DEFAULT_ASSOCIATION_WINDOW)]
        window: f64,
        /// Row labels; default to the estimate's file stem and "unknown".
        #[arg(long)]
        seq: Option<String>,
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the synthetic scene-change benchmark.
    Benchmark {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = std::env::var("SEMLOC_LOG").unwrap_or_else(|_| "error".into());
    env_logger::Builder::new().parse_filters(&level).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn intrinsics(explicit: Option<PathBuf>, frames: &Path) -> Result<CameraIntrinsics> {
    let path = match explicit {
        Some(p) => p,
        None => frames
            .parent()
            .map(|d| d.join("intrinsics.json"))
            .filter(|p| p.exists())
            .context("no --intrinsics given and no intrinsics.json next to the frames directory")?,
    };
    let k: CameraIntrinsics = read_json(&path)?;
    k.validate().map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(k)
}

fn classes(explicit: Option<PathBuf>) -> Result<ClassRegistry> {
    match explicit {
        Some(p) => ClassRegistry::load(&p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ClassRegistry::default()),
    }
}

fn annotations_dir(explicit: Option<PathBuf>, frames: &Path) -> Option<PathBuf> {
    explicit.or_else(|| frames.parent().map(|d| d.join("annotations")).filter(|p| p.is_dir()))
}

fn load_frames(
    frames: &Path,
    annotations: Option<PathBuf>,
    registry: &ClassRegistry,
    k: &CameraIntrinsics,
) -> Result<Vec<Frame>> {
    let ann = annotations_dir(annotations, frames);
    let out = read_frames_dir(frames, ann.as_deref(), registry, k)
        .with_context(|| format!("reading frames from {}", frames.display()))?;
    if out.is_empty() {
        bail!("no frames found in {}", frames.display());
    }
    Ok(out)
}

/// Pose of every frame: from the TUM file (nearest timestamp within the
/// association window) or the frame's own ground truth.
fn frame_poses(frames: &[Frame], poses: Option<&Path>) -> Result<Vec<Pose>> {
    let table = match poses {
        Some(p) => read_tum(p).with_context(|| format!("reading {}", p.display()))?,
        None => Vec::new(),
    };
    frames
        .iter()
        .map(|f| {
            if poses.is_some() {
                table
                    .iter()
                    .filter(|e| (e.timestamp - f.timestamp).abs() <= DEFAULT_ASSOCIATION_WINDOW)
                    .min_by(|a, b| {
                        (a.timestamp - f.timestamp).abs().total_cmp(&(b.timestamp - f.timestamp).abs())
                    })
                    .and_then(|e| e.pose)
                    .with_context(|| format!("no pose for frame {} at t = {}", f.id, f.timestamp))
            } else {
                f.gt_pose.with_context(|| format!("frame {} has no pose; pass --poses", f.id))
            }
        })
        .collect()
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { config, out } => {
            let cfg = SimulateConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let paths = simulate(&cfg, &out)?;
            log::info!("dataset written to {}", paths.root.display());
        }
        Command::BuildMap { frames, annotations, intrinsics: kp, out, semantic, poses, classes: cp } => {
            let k = intrinsics(kp, &frames)?;
            let registry = classes(cp)?;
            let fs = load_frames(&frames, annotations, &registry, &k)?;
            let poses = frame_poses(&fs, poses.as_deref())?;
            let cfg = MapConfig { semantic, classes: registry, ..MapConfig::default() };
            let map = build_map(&fs, &poses, &k, &cfg)?;
            save_map(&map, &out)?;
            log::info!("{} landmarks, {} keyframes", map.landmarks.len(), map.keyframes.len());
        }
        Command::Relocalize { map, frames, annotations, intrinsics: kp, mode, seed, out } => {
            let map = load_map(&map).with_context(|| format!("loading {}", map.display()))?;
            let k = intrinsics(kp, &frames)?;
            let fs = load_frames(&frames, annotations, &map.classes, &k)?;
            let params = PipelineParams { seed, classes: map.classes.clone(), ..PipelineParams::default() };
            let entries: Vec<TrajectoryEntry> = fs
                .par_iter()
                .map(|f| {
                    let r = relocalize(&map, f, &k, mode, &params);
                    match r.pose {
                        Some(p) => TrajectoryEntry::ok(r.timestamp, p),
                        None => TrajectoryEntry::failed(r.timestamp, r.failure.unwrap_or_default()),
                    }
                })
                .collect();
            let ok = entries.iter().filter(|e| e.pose.is_some()).count();
            log::info!("localized {ok}/{} frames ({mode})", entries.len());
            write_tum(&out, &entries)?;
        }
        Command::Relpose { frames, annotations, intrinsics: kp, classes: cp, mode, seed, out } => {
            let k = intrinsics(kp, &frames)?;
            let registry = classes(cp)?;
            let fs = load_frames(&frames, annotations, &registry, &k)?;
            if fs.len() < 2 {
                bail!("relpose needs at least two frames");
            }
            let params = PipelineParams { seed, classes: registry, ..PipelineParams::default() };
            fs::write(&out, relpose_csv(&fs, &k, mode, &params)?)?;
        }
        Command::Evaluate { est, gt, pos_tol, rot_tol, alignment, window, seq, label, out } => {
            let e = read_tum(&est).with_context(|| format!("reading {}", est.display()))?;
            let g = read_tum(&gt).with_context(|| format!("reading {}", gt.display()))?;
            let s = absolute_errors(&e, &g, alignment, window)?;
            let rate = success_rate(&s, pos_tol, rot_tol)?;
            let seq = seq.unwrap_or_else(|| {
                est.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            });
            let record = ReportRecord {
                seq,
                mode: label.unwrap_or_else(|| "unknown".into()),
                ape_max: s.ape_stats.max,
                ape_median: s.ape_stats.median,
                ape_rmse: s.ape_stats.rmse,
                are_max: s.are_stats.max,
                are_median: s.are_stats.median,
                are_rmse: s.are_stats.rmse,
                success_rate: rate,
                correct_match_ratio: f64::NAN,
                ape_series: s.ape.clone(),
                are_series: s.are.clone(),
            };
            let format = match out.extension().and_then(|e| e.to_str()) {
                Some("json") => ReportFormat::Json,
                _ => ReportFormat::Csv,
            };
            emit_report(&[record], &out, format)?;
            println!(
                "{} localized of {} | APE rmse {} m | ARE rmse {} deg | success {}",
                s.ape.len(),
                s.total_frames,
                sig6(s.ape_stats.rmse),
                sig6(s.are_stats.rmse),
                sig6(rate)
            );
        }
        Command::Benchmark { config, out } => {
            let cfg = match config {
                Some(p) => BenchmarkConfig::load(&p).with_context(|| format!("loading {}", p.display()))?,
                None => BenchmarkConfig::default(),
            };
            let outcome = run_benchmark(&cfg, &out)?;
            println!("scenario,mode,success_rate,ape_rmse,are_max,correct_match_ratio");
            for spec in &cfg.perturbations {
                for &mode in &cfg.modes {
                    let m = |f: fn(&ReportRecord) -> f64| {
                        mean_over_seeds(&outcome.runs, &spec.label(), mode, |r| f(&r.record))
                    };
                    println!(
                        "{},{},{},{},{},{}",
                        spec.label(),
                        mode,
                        sig6(m(|r| r.success_rate)),
                        sig6(m(|r| r.ape_rmse)),
                        sig6(m(|r| r.are_max)),
                        sig6(m(|r| r.correct_match_ratio))
                    );
                }
            }
            log::info!("{} files written to {}", outcome.files.len(), out.display());
        }
    }
    Ok(())
}

const RELPOSE_HEADER: &str = "frame_a,frame_b,mode,matches,inliers,pure_rotation,planar_suspected,\
qx,qy,qz,qw,tx,ty,tz,correct_ratio,rotation_error_deg,heading_error_deg,failure";

/// One row per selected pair. Ground-truth columns are filled when both
/// frames carry poses.
fn relpose_csv(fs: &[Frame], k: &CameraIntrinsics, mode: SemanticMode, params: &PipelineParams) -> Result<String> {
    let feats: Vec<_> = fs.par_iter().map(|f| mode_features(f, mode, &params.extract).descriptors).collect();
    let n_desc: usize = feats.iter().map(Vec::len).sum();
    if n_desc < 2 {
        bail!("frames have too few features to select pairs");
    }
    let vocabulary = train_vocabulary(&feats, 256, 20_000, params.seed)?;
    let bows: Vec<(u64, _)> = fs.iter().zip(&feats).map(|(f, d)| (f.id, bow_vector(d, &vocabulary))).collect();
    let pairs = pair_selection(&bows, PairMethod::MostSimilar);
    let index = |id: u64| fs.iter().position(|f| f.id == id).expect("paired frame exists");
    let rows: Vec<String> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (fa, fb) = (&fs[index(a)], &fs[index(b)]);
            let r = relative_pose(fa, fb, k, mode, params);
            let mut row = format!(
                "{a},{b},{mode},{},{},{},{}",
                r.matches.len(),
                r.inliers,
                r.pure_rotation,
                r.planar_suspected
            );
            match &r.relative {
                Some(rel) => {
                    let q = Pose::from_matrix(&rel.rotation, rel.translation_direction).rotation;
                    let t = rel.translation_direction;
                    for v in [q.i, q.j, q.k, q.w, t.x, t.y, t.z] {
                        let _ = write!(row, ",{}", sig6(v));
                    }
                }
                None => row.push_str(",,,,,,,"),
            }
            match (fa.gt_pose, fb.gt_pose) {
                (Some(ga), Some(gb)) => {
                    let e = evaluate_pair(a, b, &r.pixel_pairs(), r.relative.as_ref(), r.pure_rotation, &ga, &gb, k);
                    let opt = |x: Option<f64>| x.map(sig6).unwrap_or_default();
                    let _ = write!(
                        row,
                        ",{},{},{}",
                        sig6(e.correct_ratio),
                        opt(e.rotation_error_deg),
                        opt(e.heading_error_deg)
                    );
                }
                _ => row.push_str(",,,"),
            }
            let _ = write!(row, ",{}", r.failure.unwrap_or_default());
            row
        })
        .collect();
    let mut out = String::from(RELPOSE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    Ok(out)
}
