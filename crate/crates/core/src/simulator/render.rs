use nalgebra::Vector3;

use super::{Scene, SimError};
use crate::descriptor::Descriptor;
use crate::geometry::{project, CameraIntrinsics, Pixel, Pose};
use crate::io::{DepthRaster, InstanceInfo, InstanceMaskRaster, KeypointRecord};

/// Depth agreement required between a landmark and the surface its ray hits.
const OCCLUSION_TOL: f64 = 1e-4;

/// Nearest positive hit parameter of `origin + t * dir` with a sphere.
///
/// With `dir` scaled to unit camera-z the parameter is the z-depth.
pub fn ray_sphere(origin: &Vector3<f64>, dir: &Vector3<f64>, center: &Vector3<f64>, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let a = dir.dot(dir);
    let half_b = oc.dot(dir);
    let c = oc.dot(&oc) - radius * radius;
    let disc = half_b * half_b - a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // Numerically stable pair of roots.
    let q = -(half_b + half_b.signum() * sq);
    let (r1, r2) = if q != 0.0 { (q / a, c / q) } else { (-half_b / a, -half_b / a) };
    let (near, far) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
    if near > 0.0 {
        Some(near)
    } else if far > 0.0 {
        Some(far)
    } else {
        None
    }
}

/// A rendered keypoint with the landmark that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderedKeypoint {
    pub record: KeypointRecord,
    pub landmark_id: u32,
    /// Instance id of the owning object, 0 for static landmarks.
    pub instance_id: u16,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthFrame {
    pub timestamp: f64,
    pub pose: Pose,
    pub keypoints: Vec<RenderedKeypoint>,
    pub depth: DepthRaster,
    pub mask: InstanceMaskRaster,
}

impl GroundTruthFrame {
    pub fn keypoint_records(&self) -> Vec<KeypointRecord> {
        self.keypoints.iter().map(|k| k.record).collect()
    }
}

struct Caster<'a> {
    scene: &'a Scene,
    origin: Vector3<f64>,
    centers: Vec<Vector3<f64>>,
}

impl Caster<'_> {
    /// Nearest hit: (z-depth, instance id or 0 for the room).
    fn cast(&self, dir: &Vector3<f64>) -> (f64, u16) {
        let room = &self.scene.room;
        let mut best = f64::INFINITY;
        for i in 0..3 {
            let t = if dir[i] > 0.0 {
                (room.max[i] - self.origin[i]) / dir[i]
            } else if dir[i] < 0.0 {
                (room.min[i] - self.origin[i]) / dir[i]
            } else {
                continue;
            };
            if t > 0.0 && t < best {
                best = t;
            }
        }
        let mut id = 0;
        for (obj, c) in self.scene.dynamics.iter().zip(&self.centers) {
            if let Some(t) = ray_sphere(&self.origin, dir, c, obj.radius) {
                if t < best {
                    best = t;
                    id = obj.instance_id;
                }
            }
        }
        (best, id)
    }
}

/// Ray-casts depth and instance masks for `pose` at time `t` and emits every
/// landmark that is visible, unoccluded and lies on its own object's pixels.
///
/// The depth raster carries each emitted landmark's exact z-depth at its
/// nearest pixel so that keypoint depths are exact.
pub fn render_frame(scene: &Scene, pose: &Pose, k: &CameraIntrinsics, t: f64) -> Result<GroundTruthFrame, SimError> {
    let origin = pose.center();
    if !scene.room.contains(&origin) {
        return Err(SimError::Render(format!("camera centre {origin:?} outside the room")));
    }
    let centers: Vec<Vector3<f64>> = scene.dynamics.iter().map(|d| d.center_at(t)).collect();
    for (obj, c) in scene.dynamics.iter().zip(&centers) {
        if (origin - c).norm() <= obj.radius {
            return Err(SimError::Render(format!(
                "camera inside object {} at t = {t}",
                obj.instance_id
            )));
        }
    }
    let caster = Caster {
        scene,
        origin,
        centers,
    };
    let world_from_cam = pose.rotation.inverse();
    let (w, h) = (k.width, k.height);
    let mut depth = DepthRaster::new(w, h);
    let mut ids = vec![0u16; w * h];
    for y in 0..h {
        for x in 0..w {
            let dir = world_from_cam * k.ray(&Pixel::new(x as f64, y as f64));
            let (d, id) = caster.cast(&dir);
            depth.values[y * w + x] = d as f32;
            ids[y * w + x] = id;
        }
    }
    let mask = InstanceMaskRaster {
        width: w,
        height: h,
        instances: scene
            .dynamics
            .iter()
            .map(|d| InstanceInfo {
                id: d.instance_id,
                class_id: d.class_id,
            })
            .collect(),
        ids,
    };

    // Candidate landmarks: (world position, id, instance, descriptor).
    let statics = scene
        .landmarks
        .iter()
        .map(|l| (l.position.coords, l.id, 0u16, l.descriptor));
    let surfaces = scene.dynamics.iter().zip(&caster.centers).flat_map(|(obj, c)| {
        obj.surface_landmarks
            .iter()
            .map(move |(off, id, desc)| (c + off * obj.radius, *id, obj.instance_id, *desc))
    });
    let mut visible: Vec<(Pixel, f64, u32, u16, Descriptor)> = Vec::new();
    let mut claimed = vec![false; w * h];
    for (pw, id, inst, desc) in statics.chain(surfaces) {
        let pc = pose.transform(&nalgebra::Point3::from(pw));
        let Ok(px) = project(&pc, k) else { continue };
        if !(px.u >= 0.0 && px.v >= 0.0 && px.u <= (w - 1) as f64 && px.v <= (h - 1) as f64) {
            continue;
        }
        let (hit, hit_id) = caster.cast(&(world_from_cam * k.ray(&px)));
        if hit_id != inst || (hit - pc.z).abs() > OCCLUSION_TOL {
            continue;
        }
        let (x, y) = (px.u.round() as usize, px.v.round() as usize);
        let i = y * w + x;
        if mask.ids[i] != inst || claimed[i] {
            continue;
        }
        claimed[i] = true;
        visible.push((px, pc.z, id, inst, desc));
    }

    // Octave from the depth quartile within this frame.
    let mut zs: Vec<f64> = visible.iter().map(|v| v.1).collect();
    zs.sort_by(f64::total_cmp);
    let quartiles: Vec<f64> = if zs.is_empty() {
        Vec::new()
    } else {
        (1..4).map(|q| zs[(q * zs.len() / 4).min(zs.len() - 1)]).collect()
    };
    let keypoints = visible
        .into_iter()
        .map(|(px, z, id, inst, desc)| {
            let (x, y) = (px.u.round() as usize, px.v.round() as usize);
            depth.set(x, y, z as f32);
            let octave = quartiles.iter().filter(|q| z >= **q).count() as u8;
            RenderedKeypoint {
                record: KeypointRecord {
                    u: px.u as f32,
                    v: px.v as f32,
                    response: (1.0 / z) as f32,
                    octave,
                    descriptor: desc,
                },
                landmark_id: id,
                instance_id: inst,
                depth: z,
            }
        })
        .collect();
    Ok(GroundTruthFrame {
        timestamp: t,
        pose: *pose,
        keypoints,
        depth,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{look_at, Point3};
    use crate::simulator::{DynamicObject, Landmark, Room};
    use rand::{Rng, SeedableRng};

    fn box_scene(landmarks: Vec<Landmark>, dynamics: Vec<DynamicObject>) -> Scene {
        Scene {
            room: Room {
                min: Vector3::new(-5.0, -5.0, -5.0),
                max: Vector3::new(5.0, 5.0, 4.0),
            },
            landmarks,
            dynamics,
        }
    }

    /// Camera at the origin looking down world +z, image v along world +y.
    fn forward_pose() -> Pose {
        look_at(&Vector3::zeros(), &Vector3::new(0.0, 0.0, 1.0), &Vector3::new(0.0, 1.0, 0.0))
    }

    #[test]
    fn landmark_ahead_and_z_depth_of_wall() {
        let k = CameraIntrinsics::new(100.0, 100.0, 32.0, 24.0, 64, 48).unwrap();
        let lm = Landmark {
            id: 0,
            position: Point3::new(0.0, 0.0, 3.0),
            descriptor: Descriptor::default(),
        };
        // Put the landmark on a wall at z = 3 by shrinking the room.
        let mut scene = box_scene(vec![lm], vec![]);
        scene.room.max.z = 3.0;
        let f = render_frame(&scene, &forward_pose(), &k, 0.0).unwrap();
        assert_eq!(f.keypoints.len(), 1);
        let kp = f.keypoints[0].record;
        assert!((kp.u - 32.0).abs() < 1e-6 && (kp.v - 24.0).abs() < 1e-6);
        assert_eq!(f.depth.get(32, 24), 3.0);

        let scene = box_scene(vec![], vec![]);
        let f = render_frame(&scene, &forward_pose(), &k, 0.0).unwrap();
        assert_eq!(f.depth.get(32, 24), 4.0);
        assert_eq!(f.depth.get(5, 40), 4.0);
        assert_eq!(f.depth.get(63, 0), 4.0);
    }

    #[test]
    fn sphere_occludes_landmark_behind_it() {
        let k = CameraIntrinsics::new(100.0, 100.0, 32.0, 24.0, 64, 48).unwrap();
        let mut scene = box_scene(
            vec![Landmark {
                id: 0,
                position: Point3::new(0.0, 0.0, 4.0),
                descriptor: Descriptor::default(),
            }],
            vec![DynamicObject {
                instance_id: 3,
                class_id: 1,
                radius: 0.5,
                anchor: Vector3::new(0.0, 0.0, 2.0),
                amplitude: Vector3::zeros(),
                period: 1.0,
                phase: Vector3::zeros(),
                surface_landmarks: vec![],
            }],
        );
        let f = render_frame(&scene, &forward_pose(), &k, 0.0).unwrap();
        assert!(f.keypoints.is_empty());
        assert_eq!(f.mask.get(32, 24), 3);
        assert!((f.depth.get(32, 24) - 1.5).abs() < 1e-6);
        // Brute-force ray check over the whole mask.
        for y in 0..48 {
            for x in 0..64 {
                let dir = Vector3::new((x as f64 - 32.0) / 100.0, (y as f64 - 24.0) / 100.0, 1.0);
                let hits = ray_sphere(&Vector3::zeros(), &dir, &Vector3::new(0.0, 0.0, 2.0), 0.5).is_some();
                assert_eq!(f.mask.get(x, y) == 3, hits, "pixel {x},{y}");
            }
        }
        // Move the sphere away and the landmark reappears.
        scene.dynamics[0].anchor = Vector3::new(3.0, 3.0, 2.0);
        assert_eq!(render_frame(&scene, &forward_pose(), &k, 0.0).unwrap().keypoints.len(), 1);
    }

    #[test]
    fn camera_outside_room_fails() {
        let k = CameraIntrinsics::tum_like();
        let scene = box_scene(vec![], vec![]);
        let pose = look_at(&Vector3::new(9.0, 0.0, 0.0), &Vector3::zeros(), &Vector3::new(0.0, 0.0, -1.0));
        assert!(matches!(render_frame(&scene, &pose, &k, 0.0), Err(SimError::Render(_))));
    }

    #[test]
    fn ray_sphere_matches_closed_form() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut hits = 0;
        for _ in 0..100_000 {
            let o: Vector3<f64> = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let c = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            // Aim roughly at the sphere so a good share of rays hit.
            let d = (c - o) + Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let r: f64 = rng.random_range(0.2..2.0);
            // Textbook quadratic formula.
            let a = d.dot(&d);
            let b = 2.0 * d.dot(&(o - c));
            let cc = (o - c).dot(&(o - c)) - r * r;
            let disc = b * b - 4.0 * a * cc;
            let expected = if disc < 0.0 {
                None
            } else {
                let t1 = (-b - disc.sqrt()) / (2.0 * a);
                let t2 = (-b + disc.sqrt()) / (2.0 * a);
                if t1 > 0.0 { Some(t1) } else if t2 > 0.0 { Some(t2) } else { None }
            };
            match (ray_sphere(&o, &d, &c, r), expected) {
                (Some(a), Some(b)) => {
                    hits += 1;
                    assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
                }
                (None, None) => {}
                (got, want) => panic!("{got:?} vs {want:?}"),
            }
        }
        assert!(hits > 10_000);
    }
}
