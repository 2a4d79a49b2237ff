//! Experiment recipes shared by the ablation commands and the acceptance suite.

use std::sync::Arc;

use nalgebra::Vector3;

use crate::backend::{track_sequence, TrackError, TrackerConfig, TrackingResult};
use crate::evaluation::{ate_rmse, cv, depth_frame_metrics, AlignMode, DepthMap, DEFAULT_MAX_DT};
use crate::frontend::DepthRange;
use crate::geometry::CameraIntrinsics;
use crate::io::Trajectory;
use crate::sensors::{
    DepthNoiseModel, DepthNoiseState, MemorySensors, NoisySensors, SensorError, SensorFrame, SensorNoise, SensorStream,
    SyntheticSensors,
};
use crate::simulator::{build_scene, DynamicSpec, SceneConfig, PERSON_CLASS};

/// Default room with three oscillating spheres in front of the orbit; about
/// a third of the keypoints land on them.
pub fn dynamic_scene() -> SceneConfig {
    SceneConfig {
        dynamics: Some(DynamicSpec {
            count: 3,
            class_id: PERSON_CLASS,
            radius: 0.35,
            centre: Vector3::new(0.0, 0.0, 1.2),
            spread: Vector3::new(0.6, 0.6, 0.2),
            amplitude: Vector3::new(0.5, 0.5, 0.1),
            period: 3.0,
            surface_landmarks: 150,
        }),
        ..Default::default()
    }
}

/// 12 x 12 x 4 m room, so the far wall sits beyond 10 m.
pub fn large_room_scene() -> SceneConfig {
    let mut cfg = SceneConfig {
        room_size: Vector3::new(12.0, 12.0, 4.0),
        landmarks: 3000,
        ..Default::default()
    };
    cfg.trajectory.eye = Vector3::new(2.5, 0.0, 1.6);
    cfg.trajectory.target = Vector3::new(0.0, 0.0, 1.5);
    cfg.trajectory.period = 60.0;
    cfg
}

/// Ground-truth frames rendered once and replayed for every run.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub frames: Arc<Vec<SensorFrame>>,
    pub intrinsics: CameraIntrinsics,
    pub groundtruth: Trajectory,
}

pub fn render(cfg: &SceneConfig, seed: u64) -> Result<Rendered, SensorError> {
    let scene = build_scene(cfg, seed)?;
    let mut s = SyntheticSensors::new(scene, cfg.trajectory.clone(), cfg.intrinsics)?;
    let groundtruth = s.ground_truth()?;
    let frames = MemorySensors::record(&mut s)?;
    Ok(Rendered {
        frames: Arc::new(frames),
        intrinsics: cfg.intrinsics,
        groundtruth,
    })
}

pub fn run_slam(r: &Rendered, noise: &SensorNoise, noise_seed: u64, tc: &TrackerConfig) -> Result<TrackingResult, TrackError> {
    let inner = MemorySensors::new(r.frames.clone(), r.intrinsics);
    let mut s = NoisySensors::new(inner, *noise, noise_seed)?;
    track_sequence(&mut s, tc)
}

/// ATE of a run, or infinity when tracking aborts or evaluation fails.
pub fn run_ate(r: &Rendered, noise: &SensorNoise, noise_seed: u64, tc: &TrackerConfig, mode: AlignMode) -> f64 {
    run_slam(r, noise, noise_seed, tc)
        .ok()
        .filter(|res| !res.diagnostics.aborted)
        .and_then(|res| ate_rmse(&res.trajectory, &r.groundtruth, mode, DEFAULT_MAX_DT).ok())
        .map_or(f64::INFINITY, |a| a.rmse)
}

pub fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-frame depth error of the frames a stream hands out, measured against
/// the noise-free rasters.
struct Metered<S> {
    inner: S,
    truth: Arc<Vec<SensorFrame>>,
    rmse: Vec<f64>,
    scale: Vec<f64>,
}

impl<S: SensorStream> SensorStream for Metered<S> {
    fn intrinsics(&self) -> CameraIntrinsics {
        self.inner.intrinsics()
    }

    fn frame_count(&self) -> usize {
        self.inner.frame_count()
    }

    fn next_frame(&mut self) -> Result<SensorFrame, SensorError> {
        let f = self.inner.next_frame()?;
        if let Some(gt) = self.truth.get(f.index) {
            if let Ok(m) = depth_frame_metrics(&DepthMap::from(&f.depth), &DepthMap::from(&gt.depth)) {
                self.rmse.push(m.rmse);
                self.scale.push(m.scale);
            }
        }
        Ok(f)
    }
}

/// One SLAM run with the depth statistics of the noise it saw.
#[derive(Debug, Clone, PartialEq)]
pub struct MeteredRun {
    pub ate: f64,
    pub mean_depth_rmse: f64,
    pub scale_cv: f64,
}

pub fn run_metered(r: &Rendered, noise: &SensorNoise, noise_seed: u64, tc: &TrackerConfig, mode: AlignMode) -> Result<MeteredRun, TrackError> {
    let inner = NoisySensors::new(MemorySensors::new(r.frames.clone(), r.intrinsics), *noise, noise_seed)?;
    let mut s = Metered {
        inner,
        truth: r.frames.clone(),
        rmse: Vec::new(),
        scale: Vec::new(),
    };
    let res = track_sequence(&mut s, tc)?;
    let ate = if res.diagnostics.aborted {
        f64::INFINITY
    } else {
        ate_rmse(&res.trajectory, &r.groundtruth, mode, DEFAULT_MAX_DT).map_or(f64::INFINITY, |a| a.rmse)
    };
    Ok(MeteredRun {
        ate,
        mean_depth_rmse: s.rmse.iter().sum::<f64>() / s.rmse.len().max(1) as f64,
        scale_cv: cv(&s.scale).unwrap_or(f64::NAN),
    })
}

/// Expected mean per-frame depth RMSE of a scale-plus-relative noise model,
/// `E[mean_t sqrt(((s_t - 1)^2 + rel^2) * mean(g^2))]`, averaged over
/// `sims` simulated scale sequences.
pub fn expected_depth_rmse(r: &Rendered, m: &DepthNoiseModel, sims: usize, seed: u64) -> f64 {
    use rand::SeedableRng;
    let m2: Vec<f64> = r
        .frames
        .iter()
        .map(|f| {
            let v: Vec<f64> = f.depth.values.iter().filter(|d| **d > 0.0).map(|&d| (d as f64).powi(2)).collect();
            v.iter().sum::<f64>() / v.len().max(1) as f64
        })
        .collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..sims {
        let mut state = DepthNoiseState::new();
        let mut acc = 0.0;
        for g2 in &m2 {
            let s = if m.scale_cv > 0.0 { state.step(m, &mut rng) } else { 1.0 };
            acc += (((s - 1.0).powi(2) + m.rel_sigma.powi(2)) * g2).sqrt();
        }
        total += acc / m2.len() as f64;
    }
    total / sims as f64
}

/// Scale correlation of the consistency experiment: independent per frame.
pub const CONSISTENCY_PHI: f64 = 0.0;

/// Two depth models with equal expected mean per-frame RMSE: `high` carries
/// only a per-frame scale error of CV `cv_high`; `low` pairs CV `cv_low`
/// with per-pixel relative noise chosen by bisection.
pub fn matched_noise_pair(r: &Rendered, cv_low: f64, cv_high: f64, phi: f64, seed: u64) -> (DepthNoiseModel, DepthNoiseModel) {
    const SIMS: usize = 200;
    let high = DepthNoiseModel {
        scale_cv: cv_high,
        ar1_phi: phi,
        ..Default::default()
    };
    let target = expected_depth_rmse(r, &high, SIMS, seed);
    let low_with = |rel: f64| DepthNoiseModel {
        scale_cv: cv_low,
        ar1_phi: phi,
        rel_sigma: rel,
        ..Default::default()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if expected_depth_rmse(r, &low_with(mid), SIMS, seed) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (low_with(0.5 * (lo + hi)), high)
}

/// Depth noise of the clip sweep: far depths are both noisier and biased.
pub const CLIP_SWEEP_REL_SIGMA: f64 = 0.03;
pub const CLIP_SWEEP_BIAS_GAIN: f64 = 0.1;

/// Tracker configuration with the front end keeping depths in `[0.3, d_max]`.
pub fn clipped(tc: &TrackerConfig, d_max: f64) -> TrackerConfig {
    let mut out = tc.clone();
    out.frontend.depth_range = DepthRange {
        d_min: 0.3,
        d_max,
    };
    out
}
