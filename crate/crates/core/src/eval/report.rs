use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const CSV_HEADER: &str =
    "seq,mode,ape_max,ape_median,ape_rmse,are_max,are_median,are_rmse,success_rate,correct_match_ratio";

pub const RMSE_RULE: &str =
    "APE/ARE aggregates (max, median, RMSE) cover localized frames only; failed frames count as failures in success_rate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(format!("unknown report format '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub seq: String,
    pub mode: String,
    pub ape_max: f64,
    pub ape_median: f64,
    pub ape_rmse: f64,
    pub are_max: f64,
    pub are_median: f64,
    pub are_rmse: f64,
    pub success_rate: f64,
    /// NaN when no pair was evaluated.
    pub correct_match_ratio: f64,
    /// Per-frame errors behind the aggregates (used for CDF files).
    #[serde(skip)]
    pub ape_series: Vec<f64>,
    #[serde(skip)]
    pub are_series: Vec<f64>,
}

/// Six significant digits, shortest form that re-parses to the rounded
/// value.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("float round trip");
    format!("{rounded}")
}

fn parse_num(s: &str) -> Result<f64, String> {
    match s {
        "nan" => Ok(f64::NAN),
        _ => s.parse().map_err(|_| format!("bad number '{s}'")),
    }
}

pub fn format_csv(records: &[ReportRecord]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let nums = [
            r.ape_max,
            r.ape_median,
            r.ape_rmse,
            r.are_max,
            r.are_median,
            r.are_rmse,
            r.success_rate,
            r.correct_match_ratio,
        ];
        let _ = write!(out, "{},{}", r.seq, r.mode);
        for v in nums {
            let _ = write!(out, ",{}", sig6(v));
        }
        out.push('\n');
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<ReportRecord>, EvalError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(EvalError::Report("missing or unexpected header".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 10 {
                return Err(EvalError::Report(format!("row {}: expected 10 fields", i + 1)));
            }
            let n = |j: usize| parse_num(f[j]).map_err(|e| EvalError::Report(format!("row {}: {e}", i + 1)));
            Ok(ReportRecord {
                seq: f[0].to_string(),
                mode: f[1].to_string(),
                ape_max: n(2)?,
                ape_median: n(3)?,
                ape_rmse: n(4)?,
                are_max: n(5)?,
                are_median: n(6)?,
                are_rmse: n(7)?,
                success_rate: n(8)?,
                correct_match_ratio: n(9)?,
                ape_series: Vec::new(),
                are_series: Vec::new(),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct Metadata {
    aggregation: &'static str,
    success_tolerance: &'static str,
    columns: &'static str,
}

fn metadata() -> Metadata {
    Metadata {
        aggregation: RMSE_RULE,
        success_tolerance: "strict: APE < pos_tol and ARE < rot_tol",
        columns: CSV_HEADER,
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    metadata: Metadata,
    records: Vec<JsonRecord<'a>>,
}

// numbers as 6-significant-digit JSON numbers (NaN → null)
#[derive(Serialize)]
struct JsonRecord<'a> {
    seq: &'a str,
    mode: &'a str,
    ape_max: Option<serde_json::Number>,
    ape_median: Option<serde_json::Number>,
    ape_rmse: Option<serde_json::Number>,
    are_max: Option<serde_json::Number>,
    are_median: Option<serde_json::Number>,
    are_rmse: Option<serde_json::Number>,
    success_rate: Option<serde_json::Number>,
    correct_match_ratio: Option<serde_json::Number>,
}

fn jnum(x: f64) -> Option<serde_json::Number> {
    sig6(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64)
}

pub fn format_json(records: &[ReportRecord]) -> String {
    let report = JsonReport {
        metadata: metadata(),
        records: records
            .iter()
            .map(|r| JsonRecord {
                seq: &r.seq,
                mode: &r.mode,
                ape_max: jnum(r.ape_max),
                ape_median: jnum(r.ape_median),
                ape_rmse: jnum(r.ape_rmse),
                are_max: jnum(r.are_max),
                are_median: jnum(r.are_median),
                are_rmse: jnum(r.are_rmse),
                success_rate: jnum(r.success_rate),
                correct_match_ratio: jnum(r.correct_match_ratio),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&report).expect("report serialization");
    s.push('\n');
    s
}

fn cdf(values: &[f64]) -> String {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out = String::from("error,cumulative_fraction\n");
    for (i, x) in v.iter().enumerate() {
        let _ = writeln!(out, "{},{}", x, (i + 1) as f64 / v.len() as f64);
    }
    out
}

/// Writes the report and, next to it, `<stem>.meta.json` (CSV only) plus
/// per-record CDF files `<stem>_<seq>_<mode>_{ape,are}_cdf.csv`. Returns
/// every path written.
pub fn emit_report(records: &[ReportRecord], path: impl AsRef<Path>, format: ReportFormat) -> Result<Vec<PathBuf>, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Report("no records to emit".into()));
    }
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let mut written = vec![path.to_path_buf()];
    match format {
        ReportFormat::Csv => {
            fs::write(path, format_csv(records))?;
            let meta = dir.join(format!("{stem}.meta.json"));
            fs::write(&meta, serde_json::to_string_pretty(&metadata()).expect("metadata") + "\n")?;
            written.push(meta);
        }
        ReportFormat::Json => fs::write(path, format_json(records))?,
    }
    for r in records {
        for (what, series) in [("ape", &r.ape_series), ("are", &r.are_series)] {
            if series.is_empty() {
                continue;
            }
            let p = dir.join(format!("{stem}_{}_{}_{what}_cdf.csv", r.seq, r.mode));
            fs::write(&p, cdf(series))?;
            written.push(p);
        }
    }
    Ok(written)
}
