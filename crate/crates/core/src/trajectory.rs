//! TUM trajectory files: `timestamp tx ty tz qx qy qz qw` with the camera
//! centre and camera-to-world orientation. Frames that could not be
//! localized are kept as comment lines `# <timestamp> FAILED <reason>`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion};
use thiserror::Error;

use crate::geometry::{Pose, Vec3};

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEntry {
    pub timestamp: f64,
    /// World-to-camera pose; `None` for a failed frame.
    pub pose: Option<Pose>,
    pub failure: Option<String>,
}

impl TrajectoryEntry {
    pub fn ok(timestamp: f64, pose: Pose) -> Self {
        Self { timestamp, pose: Some(pose), failure: None }
    }

    pub fn failed(timestamp: f64, reason: impl Into<String>) -> Self {
        Self { timestamp, pose: None, failure: Some(reason.into()) }
    }
}

pub fn format_tum(entries: &[TrajectoryEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        match &e.pose {
            Some(p) => {
                let c = p.center();
                let q = p.orientation();
                let q = q.quaternion();
                let _ = writeln!(
                    out,
                    "{:.6} {} {} {} {} {} {} {}",
                    e.timestamp, c.x, c.y, c.z, q.i, q.j, q.k, q.w
                );
            }
            None => {
                let reason = e.failure.as_deref().unwrap_or("unknown").replace('\n', " ");
                let _ = writeln!(out, "# {:.6} FAILED {}", e.timestamp, reason);
            }
        }
    }
    out
}

pub fn write_tum(path: impl AsRef<Path>, entries: &[TrajectoryEntry]) -> Result<(), TrajectoryError> {
    std::fs::write(path, format_tum(entries))?;
    Ok(())
}

pub fn parse_tum(text: &str) -> Result<Vec<TrajectoryEntry>, TrajectoryError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |message: String| TrajectoryError::Parse { line: i + 1, message };
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut parts = rest.split_whitespace();
            if let (Some(ts), Some("FAILED")) = (parts.next(), parts.next()) {
                let timestamp = ts.parse().map_err(|_| err(format!("bad timestamp {ts:?}")))?;
                let reason: Vec<&str> = parts.collect();
                out.push(TrajectoryEntry::failed(timestamp, reason.join(" ")));
            }
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}"))))
            .collect::<Result<_, _>>()?;
        if v.len() != 8 {
            return Err(err(format!("expected 8 fields, got {}", v.len())));
        }
        let q = Quaternion::new(v[7], v[4], v[5], v[6]);
        if !(q.norm() > 1e-9) {
            return Err(err("zero quaternion".into()));
        }
        let pose = Pose::from_center(UnitQuaternion::from_quaternion(q), Vec3::new(v[1], v[2], v[3]));
        out.push(TrajectoryEntry::ok(v[0], pose));
    }
    Ok(out)
}

pub fn read_tum(path: impl AsRef<Path>) -> Result<Vec<TrajectoryEntry>, TrajectoryError> {
    parse_tum(&std::fs::read_to_string(path)?)
}
