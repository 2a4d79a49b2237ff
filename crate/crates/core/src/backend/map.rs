use std::collections::BTreeMap;

use crate::descriptor::Descriptor;
use crate::frontend::FrontEndOutput;
use crate::geometry::{Pixel, Point3, Pose};

#[derive(Debug, Clone, PartialEq)]
pub struct MapPoint {
    pub id: u64,
    pub position: Point3<f64>,
    /// Descriptor of the most recent observation.
    pub descriptor: Descriptor,
    pub observations: usize,
}

/// One keyframe's view of a map point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub point_id: u64,
    pub pixel: Pixel,
    /// Measured z-depth, used as a fixed prior in bundle adjustment.
    pub depth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyFrame {
    pub id: usize,
    pub frame_index: usize,
    pub timestamp: f64,
    /// Camera-from-world.
    pub pose: Pose,
    pub observations: Vec<Observation>,
    /// Features that neither matched nor created a point; candidates for
    /// two-view triangulation.
    pub unmatched: Vec<(Pixel, Descriptor)>,
    /// Tracking inliers when this keyframe was created.
    pub reference_inliers: usize,
}

impl KeyFrame {
    pub fn observes(&self, point_id: u64) -> bool {
        self.observations.iter().any(|o| o.point_id == point_id)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorldMap {
    pub points: BTreeMap<u64, MapPoint>,
    pub keyframes: Vec<KeyFrame>,
    next_point_id: u64,
}

impl WorldMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_point(&mut self, position: Point3<f64>, descriptor: Descriptor) -> u64 {
        let id = self.next_point_id;
        self.next_point_id += 1;
        self.points.insert(
            id,
            MapPoint {
                id,
                position,
                descriptor,
                observations: 0,
            },
        );
        id
    }

    /// Records an observation in keyframe `kf`, refreshing the point descriptor.
    pub fn observe(&mut self, kf: usize, obs: Observation, descriptor: Descriptor) {
        if self.keyframes[kf].observes(obs.point_id) {
            return;
        }
        if let Some(p) = self.points.get_mut(&obs.point_id) {
            p.observations += 1;
            p.descriptor = descriptor;
            self.keyframes[kf].observations.push(obs);
        }
    }

    pub fn last_keyframe(&self) -> Option<&KeyFrame> {
        self.keyframes.last()
    }

    /// Ids of points observed by the last `n` keyframes, ascending.
    pub fn points_of_recent_keyframes(&self, n: usize) -> Vec<u64> {
        let start = self.keyframes.len().saturating_sub(n);
        let mut ids: Vec<u64> = self.keyframes[start..]
            .iter()
            .flat_map(|kf| kf.observations.iter().map(|o| o.point_id))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Inputs to the keyframe policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingStats {
    pub inliers: usize,
    pub reference_inliers: usize,
    pub frames_since_keyframe: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyframePolicy {
    pub min_ratio: f64,
    pub max_gap: usize,
}

impl Default for KeyframePolicy {
    fn default() -> Self {
        Self {
            min_ratio: 0.8,
            max_gap: 10,
        }
    }
}

pub fn keyframe_decision(stats: &TrackingStats, policy: &KeyframePolicy) -> bool {
    (stats.inliers as f64) < policy.min_ratio * stats.reference_inliers as f64
        || stats.frames_since_keyframe >= policy.max_gap
}

/// Frame bookkeeping attached to a new keyframe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMeta {
    pub frame_index: usize,
    pub timestamp: f64,
    pub inliers: usize,
}

/// Adds a keyframe at `pose`.
///
/// `matches` pairs indices into `features.observations()` with map point
/// ids; those become observations. Unmatched scaled features create new
/// points at their backprojection when `use_depth` is set; everything else
/// is kept as triangulation candidates. Returns the keyframe index.
pub fn insert_keyframe(
    map: &mut WorldMap,
    features: &FrontEndOutput,
    pose: Pose,
    matches: &[(usize, u64)],
    meta: FrameMeta,
    use_depth: bool,
) -> usize {
    let id = map.keyframes.len();
    map.keyframes.push(KeyFrame {
        id,
        frame_index: meta.frame_index,
        timestamp: meta.timestamp,
        pose,
        observations: Vec::new(),
        unmatched: Vec::new(),
        reference_inliers: meta.inliers,
    });
    let mut matched = vec![false; features.len()];
    for &(q, _) in matches {
        matched[q] = true;
    }
    for &(q, pid) in matches {
        let (pixel, descriptor, depth) = observation_at(features, q);
        let depth = if use_depth { depth } else { None };
        map.observe(id, Observation { point_id: pid, pixel, depth }, descriptor);
    }
    let world_from_cam = pose.inverse();
    for (q, (pixel, descriptor, depth)) in features.observations().enumerate() {
        if matched[q] {
            continue;
        }
        match (use_depth, depth) {
            (true, Some(d)) => {
                let point = world_from_cam.transform(&features.scaled[q].point);
                let pid = map.add_point(point, descriptor);
                map.observe(
                    id,
                    Observation {
                        point_id: pid,
                        pixel,
                        depth: Some(d),
                    },
                    descriptor,
                );
            }
            _ => map.keyframes[id].unmatched.push((pixel, descriptor)),
        }
    }
    if map.keyframes[id].reference_inliers == 0 {
        map.keyframes[id].reference_inliers = map.keyframes[id].observations.len();
    }
    id
}

fn observation_at(f: &FrontEndOutput, q: usize) -> (Pixel, Descriptor, Option<f64>) {
    if q < f.scaled.len() {
        let s = &f.scaled[q];
        (s.pixel, s.descriptor, Some(s.depth))
    } else {
        let m = &f.mono_only[q - f.scaled.len()];
        (m.pixel, m.descriptor, None)
    }
}
