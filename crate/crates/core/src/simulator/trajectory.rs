use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::{UnitQuaternion, Vector3};

use super::SimError;
use crate::geometry::{look_at, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    /// Circles the look-at target about the vertical axis.
    Orbit,
    /// Translates with fixed orientation; axes oscillate at 1x, 2x and 3x the base frequency.
    XyzSinusoid,
    /// Rotates about the optical centre; amplitude holds (pitch, yaw, roll) in radians.
    RpyOscillation,
    /// Moves on a sphere around the target while looking at it; amplitude holds
    /// (azimuth, elevation) swings in radians.
    Halfsphere,
}

impl FromStr for TrajectoryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "orbit" => Ok(Self::Orbit),
            "xyz" | "xyz-sinusoid" => Ok(Self::XyzSinusoid),
            "rpy" | "rpy-oscillation" => Ok(Self::RpyOscillation),
            "halfsphere" => Ok(Self::Halfsphere),
            other => Err(format!("unknown trajectory kind `{other}`")),
        }
    }
}

impl std::fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Orbit => "orbit",
            Self::XyzSinusoid => "xyz-sinusoid",
            Self::RpyOscillation => "rpy-oscillation",
            Self::Halfsphere => "halfsphere",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub amplitude: Vector3<f64>,
    pub period: f64,
    /// Camera centre at `t = 0`.
    pub eye: Vector3<f64>,
    /// Look-at point defining the base orientation (and orbit centre).
    pub target: Vector3<f64>,
    pub duration: f64,
    pub fps: f64,
}

/// World up is +z; the image `v` axis points along world down.
const DOWN: Vector3<f64> = Vector3::new(0.0, 0.0, -1.0);

impl TrajectorySpec {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(SimError::Config(format!("period must be positive, got {}", self.period)));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(SimError::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(SimError::Config(format!("invalid duration {}", self.duration)));
        }
        if (self.eye - self.target).norm() < 1e-9 {
            return Err(SimError::Config("eye and target coincide".into()));
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.fps).round() as usize
    }

    pub fn base_pose(&self) -> Pose {
        look_at(&self.eye, &self.target, &DOWN)
    }
}

fn rot_z(angle: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle)
}

/// Camera-from-world pose at time `t`.
pub fn camera_pose_at(spec: &TrajectorySpec, t: f64) -> Result<Pose, SimError> {
    if !(t >= 0.0 && t <= spec.duration + 1e-9) {
        return Err(SimError::TimeOutOfRange {
            t,
            duration: spec.duration,
        });
    }
    let w = 2.0 * PI / spec.period;
    let a = spec.amplitude;
    let base = spec.base_pose();
    let pose = match spec.kind {
        TrajectoryKind::Orbit => {
            let eye = spec.target + rot_z(w * t) * (spec.eye - spec.target);
            look_at(&eye, &spec.target, &DOWN)
        }
        TrajectoryKind::XyzSinusoid => {
            let offset = Vector3::new(
                a.x * (w * t).sin(),
                a.y * (2.0 * w * t).sin(),
                a.z * (3.0 * w * t).sin(),
            );
            let eye = spec.eye + offset;
            Pose::new(base.rotation, -(base.rotation * eye))
        }
        TrajectoryKind::RpyOscillation => {
            let s = (w * t).sin();
            // Camera-frame axes: x right (pitch), y down (yaw), z forward (roll).
            let delta = UnitQuaternion::from_scaled_axis(Vector3::new(a.x * s, a.y * s, a.z * s));
            let rotation = delta * base.rotation;
            Pose::new(rotation, -(rotation * spec.eye))
        }
        TrajectoryKind::Halfsphere => {
            let rel = spec.eye - spec.target;
            let radius = rel.norm();
            let az0 = rel.y.atan2(rel.x);
            let el0 = (rel.z / radius).clamp(-1.0, 1.0).asin();
            let az = az0 + a.x * (w * t).sin();
            let el = (el0 + a.y * (1.0 - (w * t).cos())).clamp(-1.5, 1.5);
            let eye = spec.target
                + radius * Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
            look_at(&eye, &spec.target, &DOWN)
        }
    };
    Ok(pose)
}
