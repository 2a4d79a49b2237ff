use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::ba::{local_bundle_adjustment, BaConfig, BaProblem};
use super::map::{insert_keyframe, keyframe_decision, FrameMeta, KeyframePolicy, Observation, TrackingStats, WorldMap};
use super::matching::{match_exhaustive, match_projected, Correspondence, MatchCandidate, MatchParams, QueryFeature};
use super::ransac::{pnp_ransac, PnpResult, RansacParams};
use super::BackendError;
use crate::descriptor::Descriptor;
use crate::frontend::{process_frame, FrontEndOutput, FrontendConfig};
use crate::geometry::{project, CameraIntrinsics, Pixel, Point3, Pose};
use crate::io::Trajectory;
use crate::sensors::{SensorError, SensorStream};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub frontend: FrontendConfig,
    pub matching: MatchParams,
    /// Search radius for the second matching pass when the first finds too few.
    pub wide_search_radius_px: f64,
    pub ransac: RansacParams,
    /// `ba.depth_prior == None` runs without depth after initialisation.
    pub ba: BaConfig,
    pub keyframe: KeyframePolicy,
    pub relocalization_keyframes: usize,
    pub max_lost_frames: usize,
    /// Minimum ray angle for two-view triangulation, degrees.
    pub min_parallax_deg: f64,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            frontend: FrontendConfig::default(),
            matching: MatchParams::default(),
            wide_search_radius_px: 45.0,
            ransac: RansacParams::default(),
            ba: BaConfig::default(),
            keyframe: KeyframePolicy::default(),
            relocalization_keyframes: 3,
            max_lost_frames: 30,
            min_parallax_deg: 1.0,
            seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn depth_prior(&self) -> bool {
        self.ba.depth_prior.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub frames: usize,
    pub tracked: usize,
    pub failed_frames: Vec<usize>,
    pub relocalized: usize,
    pub keyframes: usize,
    pub map_points: usize,
    pub ba_runs: usize,
    /// Every accepted LM step lowered the cost.
    pub ba_monotone: bool,
    pub mean_frontend_ms: f64,
    pub mean_inliers: f64,
    pub aborted: bool,
}

#[derive(Debug, Clone)]
pub struct TrackingResult {
    /// World-from-camera poses of the tracked frames.
    pub trajectory: Trajectory,
    pub diagnostics: Diagnostics,
    pub map: WorldMap,
}

#[derive(Debug, Error)]
pub enum TrackError {
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("sequence has no frames")]
    Empty,
}

fn queries(fe: &FrontEndOutput) -> Vec<QueryFeature> {
    fe.observations()
        .map(|(pixel, descriptor, _)| QueryFeature { pixel, descriptor })
        .collect()
}

fn candidates(map: &WorldMap, ids: Option<&[u64]>) -> Vec<MatchCandidate> {
    let mk = |p: &super::map::MapPoint| MatchCandidate {
        id: p.id,
        position: p.position,
        descriptor: p.descriptor,
    };
    match ids {
        Some(ids) => ids.iter().filter_map(|id| map.points.get(id)).map(mk).collect(),
        None => map.points.values().map(mk).collect(),
    }
}

fn solve(corr: &[Correspondence], k: &CameraIntrinsics, p: &RansacParams, rng: &mut ChaCha8Rng) -> Result<PnpResult, BackendError> {
    let pairs: Vec<(Point3<f64>, Pixel)> = corr.iter().map(|c| (c.world, c.pixel)).collect();
    pnp_ransac(&pairs, k, p, rng)
}

/// Motion-only refinement of `pose` against the inlier map points, adding
/// the current frame's depth as unary residuals.
fn refine_with_depth(pose: Pose, inliers: &[usize], corr: &[Correspondence], fe: &FrontEndOutput, k: &CameraIntrinsics, ba: &BaConfig) -> Pose {
    let mut problem = BaProblem {
        poses: vec![pose],
        fixed: vec![false],
        points: inliers.iter().map(|&i| corr[i].world).collect(),
        point_fixed: vec![true; inliers.len()],
        observations: inliers
            .iter()
            .enumerate()
            .map(|(j, &i)| {
                let q = corr[i].query;
                let depth = fe.scaled.get(q).map(|s| s.depth);
                (0, j, corr[i].pixel, depth)
            })
            .collect(),
    };
    problem.solve(k, ba);
    problem.poses[0]
}

/// Midpoint triangulation of two world-frame rays; `None` if they are
/// near-parallel or the point is behind either camera.
fn triangulate(a: &Pose, ua: &Pixel, b: &Pose, ub: &Pixel, k: &CameraIntrinsics, min_parallax: f64) -> Option<Point3<f64>> {
    let (ca, cb) = (a.center(), b.center());
    let da = (a.rotation.inverse() * k.ray(ua)).normalize();
    let db = (b.rotation.inverse() * k.ray(ub)).normalize();
    if da.dot(&db).clamp(-1.0, 1.0).acos() < min_parallax {
        return None;
    }
    // Minimise |ca + s da - cb - t db|.
    let w = ca - cb;
    let (aa, bb, ab) = (da.dot(&da), db.dot(&db), da.dot(&db));
    let den = aa * bb - ab * ab;
    if den.abs() < 1e-12 {
        return None;
    }
    let s = (ab * db.dot(&w) - bb * da.dot(&w)) / den;
    let t = (aa * db.dot(&w) - ab * da.dot(&w)) / den;
    if s <= 0.0 || t <= 0.0 {
        return None;
    }
    let p = Point3::from((ca + s * da + cb + t * db) / 2.0);
    for (pose, u) in [(a, ua), (b, ub)] {
        let q = project(&pose.transform(&p), k).ok()?;
        if q.distance(u) > 2.0 {
            return None;
        }
    }
    Some(p)
}

/// Creates points from descriptor matches between the unmatched features of
/// keyframe `kf` and those of the keyframe before it. Returns the number created.
pub fn triangulate_new_points(map: &mut WorldMap, kf: usize, k: &CameraIntrinsics, params: &MatchParams, min_parallax_deg: f64) -> usize {
    if kf == 0 {
        return 0;
    }
    let prev = kf - 1;
    let older: Vec<QueryFeature> = map.keyframes[prev]
        .unmatched
        .iter()
        .map(|&(pixel, descriptor)| QueryFeature { pixel, descriptor })
        .collect();
    // Matcher candidates carry the newer keyframe's features; ids index them.
    let newer: Vec<MatchCandidate> = map.keyframes[kf]
        .unmatched
        .iter()
        .enumerate()
        .map(|(i, &(_, descriptor))| MatchCandidate {
            id: i as u64,
            position: Point3::origin(),
            descriptor,
        })
        .collect();
    let pairs = match_exhaustive(&older, &newer, params);
    let (pa, pb) = (map.keyframes[prev].pose, map.keyframes[kf].pose);
    let mut used_new = vec![false; newer.len()];
    let mut used_old = vec![false; older.len()];
    let mut created = 0;
    for c in pairs {
        let ni = c.point_id as usize;
        let (un, desc): (Pixel, Descriptor) = map.keyframes[kf].unmatched[ni];
        let uo = older[c.query].pixel;
        let Some(p) = triangulate(&pa, &uo, &pb, &un, k, min_parallax_deg.to_radians()) else {
            continue;
        };
        let id = map.add_point(p, desc);
        map.observe(prev, Observation { point_id: id, pixel: uo, depth: None }, desc);
        map.observe(kf, Observation { point_id: id, pixel: un, depth: None }, desc);
        used_new[ni] = true;
        used_old[c.query] = true;
        created += 1;
    }
    let keep = |list: &mut Vec<(Pixel, Descriptor)>, used: &[bool]| {
        let mut i = 0;
        list.retain(|_| {
            i += 1;
            !used[i - 1]
        });
    };
    keep(&mut map.keyframes[kf].unmatched, &used_new);
    keep(&mut map.keyframes[prev].unmatched, &used_old);
    created
}

/// Runs the front end and back end over `stream`.
///
/// The first frame seeds the map at the identity pose. Later frames are
/// tracked from a constant-velocity prediction; frames that cannot be
/// tracked or relocalised are left out of the trajectory and listed in the
/// diagnostics. After `max_lost_frames` consecutive failures the run stops
/// and returns what it has, flagged as aborted.
pub fn track_sequence<S: SensorStream + ?Sized>(stream: &mut S, cfg: &TrackerConfig) -> Result<TrackingResult, TrackError> {
    cfg.ransac.validate()?;
    let k = stream.intrinsics();
    let use_depth = cfg.depth_prior();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut map = WorldMap::new();
    let mut traj = Trajectory::new();
    let mut diag = Diagnostics {
        ba_monotone: true,
        ..Default::default()
    };
    let mut last_pose: Option<Pose> = None;
    let mut velocity = Pose::identity();
    let mut lost = 0;
    let mut frontend_secs = 0.0;
    let mut inlier_sum = 0usize;
    loop {
        let frame = match stream.next_frame() {
            Ok(f) => f,
            Err(SensorError::EndOfSequence) => break,
            Err(e) => return Err(e.into()),
        };
        diag.frames += 1;
        let t0 = Instant::now();
        let fe = process_frame(&frame, &cfg.frontend, &k);
        frontend_secs += t0.elapsed().as_secs_f64();
        let meta = |inliers| FrameMeta {
            frame_index: frame.index,
            timestamp: frame.timestamp,
            inliers,
        };

        let Some(prev) = last_pose else {
            if fe.scaled.len() < cfg.ransac.min_inliers {
                diag.failed_frames.push(frame.index);
                lost += 1;
                if lost >= cfg.max_lost_frames {
                    diag.aborted = true;
                    break;
                }
                continue;
            }
            // Initialisation always uses the measured depth.
            insert_keyframe(&mut map, &fe, Pose::identity(), &[], meta(0), true);
            last_pose = Some(Pose::identity());
            traj.push(frame.timestamp, Pose::identity());
            diag.tracked += 1;
            lost = 0;
            continue;
        };

        let query = queries(&fe);
        let predicted = velocity.compose(&prev);
        let all = candidates(&map, None);
        let mut corr = match_projected(&query, &all, &predicted, &k, &cfg.matching);
        if corr.len() < 2 * cfg.ransac.min_inliers {
            let wide = MatchParams {
                search_radius_px: cfg.wide_search_radius_px,
                ..cfg.matching
            };
            let again = match_projected(&query, &all, &predicted, &k, &wide);
            if again.len() > corr.len() {
                corr = again;
            }
        }
        let mut tracked = solve(&corr, &k, &cfg.ransac, &mut rng);
        if tracked.is_err() {
            let ids = map.points_of_recent_keyframes(cfg.relocalization_keyframes);
            let reloc = match_exhaustive(&query, &candidates(&map, Some(&ids)), &cfg.matching);
            tracked = solve(&reloc, &k, &cfg.ransac, &mut rng);
            if tracked.is_ok() {
                diag.relocalized += 1;
                corr = reloc;
            }
        }
        let result = match tracked {
            Ok(r) => r,
            Err(_) => {
                diag.failed_frames.push(frame.index);
                velocity = Pose::identity();
                lost += 1;
                if lost >= cfg.max_lost_frames {
                    diag.aborted = true;
                    break;
                }
                continue;
            }
        };
        lost = 0;
        let mut pose = result.pose;
        if use_depth {
            pose = refine_with_depth(pose, &result.inliers, &corr, &fe, &k, &cfg.ba);
        }
        let n_inliers = result.inliers.len();
        inlier_sum += n_inliers;
        let last_kf = map.last_keyframe().expect("map is initialised");
        let stats = TrackingStats {
            inliers: n_inliers,
            reference_inliers: last_kf.reference_inliers,
            frames_since_keyframe: frame.index.saturating_sub(last_kf.frame_index),
        };
        if keyframe_decision(&stats, &cfg.keyframe) {
            let matches: Vec<(usize, u64)> = result.inliers.iter().map(|&i| (corr[i].query, corr[i].point_id)).collect();
            let kf = insert_keyframe(&mut map, &fe, pose, &matches, meta(n_inliers), use_depth);
            if !use_depth {
                triangulate_new_points(&mut map, kf, &k, &cfg.matching, cfg.min_parallax_deg);
            }
            let report = local_bundle_adjustment(&mut map, &k, &cfg.ba);
            diag.ba_runs += 1;
            diag.ba_monotone &= report.cost_history.windows(2).all(|w| w[1] <= w[0]);
            pose = map.keyframes[kf].pose;
        }
        velocity = pose.compose(&prev.inverse());
        last_pose = Some(pose);
        traj.push(frame.timestamp, pose.inverse());
        diag.tracked += 1;
    }
    if diag.frames == 0 {
        return Err(TrackError::Empty);
    }
    diag.keyframes = map.keyframes.len();
    diag.map_points = map.points.len();
    diag.mean_frontend_ms = 1e3 * frontend_secs / diag.frames as f64;
    let solved = diag.tracked.saturating_sub(1).max(1);
    diag.mean_inliers = inlier_sum as f64 / solved as f64;
    Ok(TrackingResult {
        trajectory: traj,
        diagnostics: diag,
        map,
    })
}
