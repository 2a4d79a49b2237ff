use nalgebra::{Matrix6, Vector2, Vector6};
use rand::seq::index::sample;
use rand::Rng;

use super::ba::{pose_point_jacobian, projection_jacobian};
use super::p3p::p3p_solve;
use super::BackendError;
use crate::geometry::{project, CameraIntrinsics, Pixel, Point3, Pose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    pub max_iterations: usize,
    pub reproj_threshold_px: f64,
    pub min_inliers: usize,
    pub confidence: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            reproj_threshold_px: 2.0,
            min_inliers: 15,
            confidence: 0.99,
        }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.max_iterations < 1 {
            return Err(BackendError::Config("ransac_max_iterations must be >= 1".into()));
        }
        if !(self.reproj_threshold_px > 0.0) {
            return Err(BackendError::Config("ransac_threshold_px must be positive".into()));
        }
        if self.min_inliers < 4 {
            return Err(BackendError::Config("ransac_min_inliers must be >= 4".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(BackendError::Config("ransac_confidence must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnpResult {
    pub pose: Pose,
    /// Indices into the correspondence slice.
    pub inliers: Vec<usize>,
    pub iterations: usize,
}

fn reprojection_error(pose: &Pose, p: &Point3<f64>, px: &Pixel, k: &CameraIntrinsics) -> f64 {
    match project(&pose.transform(p), k) {
        Ok(q) => q.distance(px),
        Err(_) => f64::INFINITY,
    }
}

fn inliers_of(pose: &Pose, corr: &[(Point3<f64>, Pixel)], k: &CameraIntrinsics, thr: f64) -> Vec<usize> {
    corr.iter()
        .enumerate()
        .filter(|(_, (p, px))| reprojection_error(pose, p, px, k) <= thr)
        .map(|(i, _)| i)
        .collect()
}

/// Number of samples needed to draw one all-inlier triple with the given confidence.
pub fn required_iterations(inlier_ratio: f64, confidence: f64, cap: usize) -> usize {
    if inlier_ratio >= 1.0 {
        return 1;
    }
    let good = inlier_ratio.powi(3);
    if good <= 0.0 {
        return cap;
    }
    let n = (1.0 - confidence).ln() / (1.0 - good).ln();
    if n.is_finite() {
        (n.ceil().max(1.0) as usize).min(cap)
    } else {
        cap
    }
}

/// Gauss-Newton on the summed squared reprojection error; steps that do not
/// lower the cost are rejected.
pub fn refine_pose(pose: &Pose, corr: &[(Point3<f64>, Pixel)], k: &CameraIntrinsics, max_iters: usize) -> Pose {
    let cost = |p: &Pose| -> f64 {
        corr.iter()
            .map(|(x, px)| {
                let pc = p.transform(x);
                if pc.z <= 0.0 {
                    return f64::INFINITY;
                }
                let q = project(&pc, k).unwrap();
                (q.u - px.u).powi(2) + (q.v - px.v).powi(2)
            })
            .sum()
    };
    let mut best = *pose;
    let mut best_cost = cost(&best);
    for _ in 0..max_iters {
        let mut h = Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        for (x, px) in corr {
            let pc = best.transform(x);
            if pc.z <= 0.0 {
                continue;
            }
            let q = project(&pc, k).unwrap();
            let r = Vector2::new(q.u - px.u, q.v - px.v);
            let j = projection_jacobian(&pc, k) * pose_point_jacobian(&pc);
            h += j.transpose() * j;
            g += j.transpose() * r;
        }
        let Some(step) = h.cholesky().map(|c| c.solve(&(-g))) else { break };
        let cand = best.retract(&step);
        let c = cost(&cand);
        if !(c < best_cost) {
            break;
        }
        let rel = (best_cost - c) / best_cost.max(1e-300);
        best = cand;
        best_cost = c;
        if rel < 1e-12 || step.norm() < 1e-14 {
            break;
        }
    }
    best
}

/// Robust pose from 3D-2D correspondences.
///
/// Hypotheses come from P3P on random triples; the iteration budget adapts to
/// the best inlier ratio seen so far. The winning hypothesis is refined on its
/// inliers and the inlier set is recomputed with the refined pose.
pub fn pnp_ransac<R: Rng + ?Sized>(
    corr: &[(Point3<f64>, Pixel)],
    k: &CameraIntrinsics,
    params: &RansacParams,
    rng: &mut R,
) -> Result<PnpResult, BackendError> {
    params.validate()?;
    let n = corr.len();
    if n < params.min_inliers.max(3) {
        return Err(BackendError::TrackingFailure(format!(
            "{n} correspondences, need at least {}",
            params.min_inliers
        )));
    }
    let thr = params.reproj_threshold_px;
    let mut best: Option<(Pose, Vec<usize>)> = None;
    let mut needed = params.max_iterations;
    let mut it = 0;
    while it < needed.min(params.max_iterations) {
        it += 1;
        let idx = sample(rng, n, 3);
        let tri = [corr[idx.index(0)], corr[idx.index(1)], corr[idx.index(2)]];
        let world = [tri[0].0, tri[1].0, tri[2].0];
        let pixels = [tri[0].1, tri[1].1, tri[2].1];
        for pose in p3p_solve(&world, &pixels, k) {
            let inl = inliers_of(&pose, corr, k, thr);
            if best.as_ref().is_none_or(|(_, b)| inl.len() > b.len()) {
                needed = required_iterations(inl.len() as f64 / n as f64, params.confidence, params.max_iterations);
                best = Some((pose, inl));
            }
        }
    }
    let Some((pose, inl)) = best else {
        return Err(BackendError::TrackingFailure("no P3P hypothesis".into()));
    };
    if inl.len() < params.min_inliers {
        return Err(BackendError::TrackingFailure(format!(
            "{} inliers after {it} iterations, need {}",
            inl.len(),
            params.min_inliers
        )));
    }
    let mut pose = pose;
    let mut inliers = inl;
    for _ in 0..2 {
        let subset: Vec<_> = inliers.iter().map(|&i| corr[i]).collect();
        pose = refine_pose(&pose, &subset, k, 10);
        let again = inliers_of(&pose, corr, k, thr);
        if again == inliers {
            break;
        }
        inliers = again;
    }
    if inliers.len() < params.min_inliers {
        return Err(BackendError::TrackingFailure(format!(
            "{} inliers after refinement, need {}",
            inliers.len(),
            params.min_inliers
        )));
    }
    Ok(PnpResult {
        pose,
        inliers,
        iterations: it,
    })
}
