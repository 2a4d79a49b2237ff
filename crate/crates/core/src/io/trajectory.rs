use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::{write_file, DatasetError};
use crate::geometry::Pose;

const QUAT_NORM_TOL: f64 = 1e-6;

/// One trajectory sample. In files the pose is world-from-camera (TUM convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StampedPose {
    pub timestamp: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<StampedPose>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, timestamp: f64, pose: Pose) {
        self.records.push(StampedPose { timestamp, pose });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.records.iter().map(|r| r.pose.translation).collect()
    }

    /// Checks strictly increasing timestamps and unit quaternions.
    pub fn validate(&self) -> Result<(), String> {
        for (i, w) in self.records.windows(2).enumerate() {
            if !(w[1].timestamp > w[0].timestamp) {
                return Err(format!(
                    "timestamps not strictly increasing at record {} ({} after {})",
                    i + 2,
                    w[1].timestamp,
                    w[0].timestamp
                ));
            }
        }
        for (i, r) in self.records.iter().enumerate() {
            let n = r.pose.rotation.as_ref().norm();
            if (n - 1.0).abs() > QUAT_NORM_TOL {
                return Err(format!("record {}: quaternion norm {n}", i + 1));
            }
        }
        Ok(())
    }

    /// TUM text. Values use the shortest representation that parses back bit-exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# timestamp tx ty tz qx qy qz qw\n");
        for r in &self.records {
            let t = r.pose.translation;
            let q = r.pose.rotation.as_ref();
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {} {}",
                r.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w
            );
        }
        s
    }
}

pub fn parse_trajectory(text: &str) -> Result<Trajectory, DatasetError> {
    let mut traj = Trajectory::new();
    let mut last_line = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(DatasetError::Data(format!(
                "line {}: expected 8 fields, found {}",
                i + 1,
                fields.len()
            )));
        }
        let mut v = [0f64; 8];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| {
                DatasetError::Data(format!("line {}: cannot parse `{f}` as a number", i + 1))
            })?;
            if !slot.is_finite() {
                return Err(DatasetError::Data(format!("line {}: non-finite value", i + 1)));
            }
        }
        let q = Quaternion::new(v[7], v[4], v[5], v[6]);
        if (q.norm() - 1.0).abs() > QUAT_NORM_TOL {
            return Err(DatasetError::Data(format!(
                "line {}: quaternion norm {} is not 1",
                i + 1,
                q.norm()
            )));
        }
        if let Some(prev) = traj.records.last() {
            if !(v[0] > prev.timestamp) {
                return Err(DatasetError::Data(format!(
                    "line {}: timestamp {} not after {} (line {last_line})",
                    i + 1,
                    v[0],
                    prev.timestamp
                )));
            }
        }
        last_line = i + 1;
        traj.push(
            v[0],
            Pose::new(UnitQuaternion::new_unchecked(q), Vector3::new(v[1], v[2], v[3])),
        );
    }
    Ok(traj)
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DatasetError::Data(format!("missing file {}", path.display()))
        } else {
            DatasetError::io(path, e)
        }
    })?;
    parse_trajectory(&text).map_err(|e| match e {
        DatasetError::Data(m) => DatasetError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), DatasetError> {
    traj.validate().map_err(DatasetError::Data)?;
    write_file(path, traj.to_text().as_bytes())
}
