//! Trajectory and matching metrics, report files and the synthetic
//! benchmark driver.

mod benchmark;
mod metrics;
mod report;
mod simulate;

pub use benchmark::{
    build_seed_maps, format_pairs_csv, mean_over_seeds, run_benchmark, run_seed, synthesize,
    BenchmarkConfig, BenchmarkOutcome, PerturbationSpec, RunResult, SeedMaps,
};
pub use metrics::{
    absolute_errors, correct_match_ratio, evaluate_pair, success_rate, Aggregates, Alignment,
    MatchEvalRecord, MatchRatio, RatioFlag, TrajectoryErrorSeries, CORRECT_MATCH_THRESHOLD,
    DEFAULT_ASSOCIATION_WINDOW, DEFAULT_POS_TOL, DEFAULT_ROT_TOL_DEG,
};
pub use report::{
    emit_report, format_csv, format_json, parse_csv, sig6, ReportFormat, ReportRecord, CSV_HEADER,
    RMSE_RULE,
};
pub use simulate::{simulate, Session, SimulateConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no estimated timestamp could be associated with ground truth")]
    NoAssociation,
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("report: {0}")]
    Report(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Stage { stage: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
