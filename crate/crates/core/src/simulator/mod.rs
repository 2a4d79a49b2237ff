//! Analytic scene generator producing ground-truth sensor streams.
//!
//! The static world is the interior of an axis-aligned room (z up, floor at
//! z = 0) whose faces carry landmarks. Dynamic objects are spheres moving on
//! sinusoidal paths; their surface landmarks are rendered as keypoints too, so
//! that the front end's mask filter has real dynamic features to remove.

mod export;
mod render;
mod trajectory;

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use export::export_sequence;
pub use render::{ray_sphere, render_frame, GroundTruthFrame, RenderedKeypoint};
pub use trajectory::{camera_pose_at, TrajectoryKind, TrajectorySpec};

use crate::descriptor::Descriptor;
use crate::geometry::{CameraIntrinsics, Point3};
use crate::io::kv::KeyValues;
use crate::io::DatasetError;

/// Class id given to moving objects ("person").
pub const PERSON_CLASS: u16 = 1;
/// Class id for stationary objects that are segmented but not dynamic.
pub const FURNITURE_CLASS: u16 = 2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scene config: {0}")]
    Config(String),
    #[error("scene generation: {0}")]
    Generation(String),
    #[error("time {t} outside trajectory duration [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("render: {0}")]
    Render(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Axis-aligned room; its interior faces are the static surfaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Room {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Room {
    /// Room of the given size centred on the origin in x/y with the floor at z = 0.
    pub fn centered(size: Vector3<f64>) -> Self {
        Self {
            min: Vector3::new(-size.x / 2.0, -size.y / 2.0, 0.0),
            max: Vector3::new(size.x / 2.0, size.y / 2.0, size.z),
        }
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] > self.min[i] && p[i] < self.max[i])
    }

    /// Distance from `p` to the nearest face plane.
    pub fn face_distance(&self, p: &Vector3<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..3 {
            best = best.min((p[i] - self.min[i]).abs()).min((p[i] - self.max[i]).abs());
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub id: u32,
    pub position: Point3<f64>,
    pub descriptor: Descriptor,
}

/// Sphere whose centre oscillates as `anchor + amplitude * sin(2 pi t / period + phase)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicObject {
    pub instance_id: u16,
    pub class_id: u16,
    pub radius: f64,
    pub anchor: Vector3<f64>,
    pub amplitude: Vector3<f64>,
    pub period: f64,
    pub phase: Vector3<f64>,
    /// Unit offsets from the centre with their landmark ids and descriptors.
    pub surface_landmarks: Vec<(Vector3<f64>, u32, Descriptor)>,
}

impl DynamicObject {
    pub fn center_at(&self, t: f64) -> Vector3<f64> {
        let w = 2.0 * PI / self.period;
        Vector3::new(
            self.anchor.x + self.amplitude.x * (w * t + self.phase.x).sin(),
            self.anchor.y + self.amplitude.y * (w * t + self.phase.y).sin(),
            self.anchor.z + self.amplitude.z * (w * t + self.phase.z).sin(),
        )
    }

    pub fn is_moving(&self) -> bool {
        self.amplitude.norm() > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub room: Room,
    pub landmarks: Vec<Landmark>,
    pub dynamics: Vec<DynamicObject>,
}

impl Scene {
    /// Number of static plus object-surface landmarks.
    pub fn landmark_count(&self) -> usize {
        self.landmarks.len()
            + self
                .dynamics
                .iter()
                .map(|d| d.surface_landmarks.len())
                .sum::<usize>()
    }

    pub fn all_descriptors(&self) -> Vec<Descriptor> {
        self.landmarks
            .iter()
            .map(|l| l.descriptor)
            .chain(
                self.dynamics
                    .iter()
                    .flat_map(|d| d.surface_landmarks.iter().map(|s| s.2)),
            )
            .collect()
    }
}

/// Parameters for one family of spheres.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicSpec {
    pub count: usize,
    pub class_id: u16,
    pub radius: f64,
    /// Anchors are drawn uniformly in `centre +- spread`.
    pub centre: Vector3<f64>,
    pub spread: Vector3<f64>,
    pub amplitude: Vector3<f64>,
    pub period: f64,
    pub surface_landmarks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub room_size: Vector3<f64>,
    pub landmarks: usize,
    pub min_descriptor_distance: u32,
    pub dynamics: Option<DynamicSpec>,
    pub trajectory: TrajectorySpec,
    pub intrinsics: CameraIntrinsics,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            room_size: Vector3::new(6.0, 6.0, 3.0),
            landmarks: 1500,
            min_descriptor_distance: 80,
            dynamics: None,
            trajectory: TrajectorySpec {
                kind: TrajectoryKind::Orbit,
                amplitude: Vector3::zeros(),
                period: 40.0,
                eye: Vector3::new(1.8, 0.0, 1.5),
                target: Vector3::new(0.0, 0.0, 1.2),
                duration: 10.0,
                fps: 30.0,
            },
            intrinsics: CameraIntrinsics::tum_like(),
        }
    }
}

fn parse_vec3(raw: &str) -> Result<Vector3<f64>, String> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("cannot parse `{raw}` as x,y,z"))?;
    match parts.as_slice() {
        [x, y, z] => Ok(Vector3::new(*x, *y, *z)),
        _ => Err(format!("expected three comma-separated values, got `{raw}`")),
    }
}

fn vec3_text(v: &Vector3<f64>) -> String {
    format!("{},{},{}", v.x, v.y, v.z)
}

fn c<T>(r: Result<T, String>) -> Result<T, SimError> {
    r.map_err(SimError::Config)
}

const SCENE_KEYS: &[&str] = &[
    "room", "landmarks", "min_descriptor_distance", "trajectory", "amplitude", "period", "eye",
    "target", "duration", "fps", "fx", "fy", "cx", "cy", "width", "height", "dynamic_objects",
    "dynamic_class", "dynamic_radius", "dynamic_centre", "dynamic_spread", "dynamic_amplitude",
    "dynamic_period", "dynamic_landmarks",
];

impl SceneConfig {
    pub fn from_kv(kv: &KeyValues) -> Result<Self, SimError> {
        if let Some((k, _)) = kv.iter().find(|(k, _)| !SCENE_KEYS.contains(k)) {
            return Err(SimError::Config(format!("unknown key `{k}`")));
        }
        let d = SceneConfig::default();
        let v3 = |key: &str, default: Vector3<f64>| -> Result<Vector3<f64>, SimError> {
            kv.get(key).map_or(Ok(default), |raw| parse_vec3(raw).map_err(|m| SimError::Config(format!("{key}: {m}"))))
        };
        let dk = d.intrinsics;
        let intrinsics = CameraIntrinsics::new(
            c(kv.get_or("fx", dk.fx))?,
            c(kv.get_or("fy", dk.fy))?,
            c(kv.get_or("cx", dk.cx))?,
            c(kv.get_or("cy", dk.cy))?,
            c(kv.get_or("width", dk.width))?,
            c(kv.get_or("height", dk.height))?,
        )
        .map_err(|e| SimError::Config(e.to_string()))?;
        let dt = &d.trajectory;
        let trajectory = TrajectorySpec {
            kind: c(kv.get_or("trajectory", dt.kind))?,
            amplitude: v3("amplitude", dt.amplitude)?,
            period: c(kv.get_or("period", dt.period))?,
            eye: v3("eye", dt.eye)?,
            target: v3("target", dt.target)?,
            duration: c(kv.get_or("duration", dt.duration))?,
            fps: c(kv.get_or("fps", dt.fps))?,
        };
        let count: usize = c(kv.get_or("dynamic_objects", 0usize))?;
        let dynamics = if count > 0 {
            Some(DynamicSpec {
                count,
                class_id: c(kv.get_or("dynamic_class", PERSON_CLASS))?,
                radius: c(kv.get_or("dynamic_radius", 0.45))?,
                centre: v3("dynamic_centre", trajectory.target)?,
                spread: v3("dynamic_spread", Vector3::new(0.3, 0.3, 0.1))?,
                amplitude: v3("dynamic_amplitude", Vector3::new(0.4, 0.4, 0.0))?,
                period: c(kv.get_or("dynamic_period", 6.0))?,
                surface_landmarks: c(kv.get_or("dynamic_landmarks", 200usize))?,
            })
        } else {
            None
        };
        let cfg = Self {
            room_size: v3("room", d.room_size)?,
            landmarks: c(kv.get_or("landmarks", d.landmarks))?,
            min_descriptor_distance: c(kv.get_or("min_descriptor_distance", d.min_descriptor_distance))?,
            dynamics,
            trajectory,
            intrinsics,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("room", vec3_text(&self.room_size));
        kv.set("landmarks", self.landmarks);
        kv.set("min_descriptor_distance", self.min_descriptor_distance);
        let t = &self.trajectory;
        kv.set("trajectory", t.kind);
        kv.set("amplitude", vec3_text(&t.amplitude));
        kv.set("period", t.period);
        kv.set("eye", vec3_text(&t.eye));
        kv.set("target", vec3_text(&t.target));
        kv.set("duration", t.duration);
        kv.set("fps", t.fps);
        let k = &self.intrinsics;
        kv.set("fx", k.fx);
        kv.set("fy", k.fy);
        kv.set("cx", k.cx);
        kv.set("cy", k.cy);
        kv.set("width", k.width);
        kv.set("height", k.height);
        if let Some(d) = &self.dynamics {
            kv.set("dynamic_objects", d.count);
            kv.set("dynamic_class", d.class_id);
            kv.set("dynamic_radius", d.radius);
            kv.set("dynamic_centre", vec3_text(&d.centre));
            kv.set("dynamic_spread", vec3_text(&d.spread));
            kv.set("dynamic_amplitude", vec3_text(&d.amplitude));
            kv.set("dynamic_period", d.period);
            kv.set("dynamic_landmarks", d.surface_landmarks);
        }
        kv
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.room_size.iter().any(|s| !(*s > 0.0)) {
            return Err(SimError::Config("room dimensions must be positive".into()));
        }
        self.trajectory.validate()?;
        let room = Room::centered(self.room_size);
        if !room.contains(&self.trajectory.eye) {
            return Err(SimError::Config("camera eye outside the room".into()));
        }
        if let Some(d) = &self.dynamics {
            if !(d.radius > 0.0) {
                return Err(SimError::Config("dynamic_radius must be positive".into()));
            }
            if !(d.period > 0.0) {
                return Err(SimError::Config("dynamic_period must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Draws descriptors at least `min_dist` apart from every previously drawn one.
struct DescriptorPool {
    drawn: Vec<Descriptor>,
    min_dist: u32,
}

impl DescriptorPool {
    const MAX_RETRIES: usize = 200;

    fn draw(&mut self, rng: &mut ChaCha8Rng) -> Result<Descriptor, SimError> {
        for _ in 0..Self::MAX_RETRIES {
            let d = Descriptor::random(rng);
            if self.drawn.iter().all(|o| o.hamming(&d) >= self.min_dist) {
                self.drawn.push(d);
                return Ok(d);
            }
        }
        Err(SimError::Generation(format!(
            "could not keep descriptors {} bits apart after {} retries ({} drawn)",
            self.min_dist,
            Self::MAX_RETRIES,
            self.drawn.len()
        )))
    }
}

fn sample_on_faces(room: &Room, rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let s = room.max - room.min;
    // Faces ordered (axis, side); area is the product of the other two extents.
    let areas = [s.y * s.z, s.y * s.z, s.x * s.z, s.x * s.z, s.x * s.y, s.x * s.y];
    let total: f64 = areas.iter().sum();
    let mut pick = rng.random::<f64>() * total;
    let mut face = 5;
    for (i, a) in areas.iter().enumerate() {
        if pick < *a {
            face = i;
            break;
        }
        pick -= a;
    }
    let axis = face / 2;
    let mut p = Vector3::zeros();
    for i in 0..3 {
        p[i] = if i == axis {
            if face % 2 == 0 {
                room.min[i]
            } else {
                room.max[i]
            }
        } else {
            room.min[i] + rng.random::<f64>() * s[i]
        };
    }
    p
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Deterministic scene generation for a fixed seed.
pub fn build_scene(cfg: &SceneConfig, seed: u64) -> Result<Scene, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let room = Room::centered(cfg.room_size);
    let mut pool = DescriptorPool {
        drawn: Vec::with_capacity(cfg.landmarks),
        min_dist: cfg.min_descriptor_distance,
    };
    let mut landmarks = Vec::with_capacity(cfg.landmarks);
    for id in 0..cfg.landmarks {
        let position = Point3::from(sample_on_faces(&room, &mut rng));
        landmarks.push(Landmark {
            id: id as u32,
            position,
            descriptor: pool.draw(&mut rng)?,
        });
    }
    let mut dynamics = Vec::new();
    let mut next_id = cfg.landmarks as u32;
    if let Some(d) = &cfg.dynamics {
        for i in 0..d.count {
            let jitter = Vector3::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            );
            let anchor = d.centre + d.spread.component_mul(&jitter);
            let phase = Vector3::new(
                rng.random::<f64>() * 2.0 * PI,
                rng.random::<f64>() * 2.0 * PI,
                rng.random::<f64>() * 2.0 * PI,
            );
            let mut surface = Vec::with_capacity(d.surface_landmarks);
            for _ in 0..d.surface_landmarks {
                surface.push((random_unit(&mut rng), next_id, pool.draw(&mut rng)?));
                next_id += 1;
            }
            dynamics.push(DynamicObject {
                instance_id: (i + 1) as u16,
                class_id: d.class_id,
                radius: d.radius,
                anchor,
                amplitude: d.amplitude,
                period: d.period,
                phase,
                surface_landmarks: surface,
            });
        }
    }
    Ok(Scene {
        room,
        landmarks,
        dynamics,
    })
}
