//! Sliding-window bundle adjustment with fixed depth priors.
//!
//! Cost: `sum huber(|reprojection residual|) + sum ((d_obs - z_cam) / sigma_d)^2`,
//! minimised with Levenberg-Marquardt over the free poses and the points,
//! eliminating points through the Schur complement.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix2x6, Matrix3, Matrix3x6, Matrix6x3, RowVector3, RowVector6, Vector2, Vector3, Vector6};

use super::map::WorldMap;
use crate::geometry::{project, skew, CameraIntrinsics, Pixel, Point3, Pose};

/// Standard deviation of the unary depth residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthPrior {
    pub sigma_rel: f64,
    /// Overrides the depth-proportional sigma when set.
    pub sigma_abs: Option<f64>,
}

impl Default for DepthPrior {
    fn default() -> Self {
        Self {
            sigma_rel: 0.05,
            sigma_abs: None,
        }
    }
}

impl DepthPrior {
    pub fn sigma(&self, depth: f64) -> f64 {
        self.sigma_abs.unwrap_or(self.sigma_rel * depth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaConfig {
    pub window: usize,
    pub max_iterations: usize,
    pub huber_delta_px: f64,
    /// `None` drops the depth residuals.
    pub depth_prior: Option<DepthPrior>,
    pub min_relative_decrease: f64,
}

impl Default for BaConfig {
    fn default() -> Self {
        Self {
            window: 5,
            max_iterations: 20,
            huber_delta_px: 2.45,
            depth_prior: Some(DepthPrior::default()),
            min_relative_decrease: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaReport {
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Cost after each accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
}

/// `d pi / d p_c` for the pinhole projection.
pub fn projection_jacobian(pc: &Point3<f64>, k: &CameraIntrinsics) -> Matrix2x3<f64> {
    let iz = 1.0 / pc.z;
    let iz2 = iz * iz;
    Matrix2x3::new(
        k.fx * iz,
        0.0,
        -k.fx * pc.x * iz2,
        0.0,
        k.fy * iz,
        -k.fy * pc.y * iz2,
    )
}

/// `d p_c / d [w; v]` under the left-multiplicative pose update.
pub fn pose_point_jacobian(pc: &Point3<f64>) -> Matrix3x6<f64> {
    let mut j = Matrix3x6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&pc.coords)));
    j.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    j
}

/// `pi(T p) - u`; `None` when the point is behind the camera.
pub fn reprojection_residual(pose: &Pose, p: &Point3<f64>, u: &Pixel, k: &CameraIntrinsics) -> Option<Vector2<f64>> {
    let q = project(&pose.transform(p), k).ok()?;
    Some(Vector2::new(q.u - u.u, q.v - u.v))
}

/// Jacobians of the reprojection residual w.r.t. the pose and the point.
pub fn reprojection_jacobians(pose: &Pose, p: &Point3<f64>, k: &CameraIntrinsics) -> (Matrix2x6<f64>, Matrix2x3<f64>) {
    let pc = pose.transform(p);
    let jp = projection_jacobian(&pc, k);
    (jp * pose_point_jacobian(&pc), jp * pose.rotation_matrix())
}

/// `(d_obs - z_cam) / sigma`.
pub fn depth_residual(pose: &Pose, p: &Point3<f64>, d_obs: f64, sigma: f64) -> f64 {
    (d_obs - pose.transform(p).z) / sigma
}

pub fn depth_jacobians(pose: &Pose, p: &Point3<f64>, sigma: f64) -> (RowVector6<f64>, RowVector3<f64>) {
    let pc = pose.transform(p);
    let jz = pose_point_jacobian(&pc).row(2).into_owned();
    let r = pose.rotation_matrix();
    (-jz / sigma, -r.row(2).into_owned() / sigma)
}

pub fn huber(s: f64, delta: f64) -> f64 {
    if s <= delta {
        s * s
    } else {
        2.0 * delta * s - delta * delta
    }
}

/// A generic bundle-adjustment problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BaProblem {
    pub poses: Vec<Pose>,
    pub fixed: Vec<bool>,
    pub points: Vec<Point3<f64>>,
    /// Points held constant (still contributing residuals).
    pub point_fixed: Vec<bool>,
    /// (pose index, point index, pixel, depth prior)
    pub observations: Vec<(usize, usize, Pixel, Option<f64>)>,
}

/// Residuals that cannot be evaluated (point behind a camera) cost this much,
/// which rejects any step producing them.
const BEHIND_COST: f64 = 1e12;

impl BaProblem {
    pub fn cost(&self, k: &CameraIntrinsics, cfg: &BaConfig) -> f64 {
        self.cost_with(&self.poses, &self.points, &self.depth_sigmas(cfg), k, cfg)
    }

    /// Per-observation depth sigma, evaluated at the current estimate and
    /// held constant for a solve. Using the estimate rather than the noisy
    /// measurement keeps the weights independent of the noise.
    fn depth_sigmas(&self, cfg: &BaConfig) -> Vec<Option<f64>> {
        self.observations
            .iter()
            .map(|&(j, i, _, d)| {
                let (prior, d) = (cfg.depth_prior?, d?);
                let z = self.poses[j].transform(&self.points[i]).z;
                Some(prior.sigma(if z > 0.0 { z } else { d }))
            })
            .collect()
    }

    fn cost_with(&self, poses: &[Pose], points: &[Point3<f64>], sigmas: &[Option<f64>], k: &CameraIntrinsics, cfg: &BaConfig) -> f64 {
        let mut c = 0.0;
        for (&(j, i, ref u, d), sigma) in self.observations.iter().zip(sigmas) {
            match reprojection_residual(&poses[j], &points[i], u, k) {
                Some(r) => c += huber(r.norm(), cfg.huber_delta_px),
                None => c += BEHIND_COST,
            }
            if let (Some(sigma), Some(d)) = (sigma, d) {
                c += depth_residual(&poses[j], &points[i], d, *sigma).powi(2);
            }
        }
        c
    }

    /// Levenberg-Marquardt. Steps are accepted only if they lower the cost.
    pub fn solve(&mut self, k: &CameraIntrinsics, cfg: &BaConfig) -> BaReport {
        let free_pose: Vec<Option<usize>> = {
            let mut n = 0;
            self.fixed
                .iter()
                .map(|&f| {
                    if f {
                        None
                    } else {
                        n += 1;
                        Some(n - 1)
                    }
                })
                .collect()
        };
        let n_free = free_pose.iter().flatten().count();
        let sigmas = self.depth_sigmas(cfg);
        let mut cost = self.cost_with(&self.poses, &self.points, &sigmas, k, cfg);
        let initial = cost;
        let mut history = vec![cost];
        let mut lambda = 1e-4;
        let mut iterations = 0;
        while iterations < cfg.max_iterations {
            iterations += 1;
            let sys = self.linearize(k, cfg, &sigmas, &free_pose, n_free);
            let mut accepted = false;
            while !accepted && lambda < 1e12 {
                let Some((dp, dl)) = sys.solve(lambda) else {
                    lambda *= 10.0;
                    continue;
                };
                let mut poses = self.poses.clone();
                for (j, slot) in free_pose.iter().enumerate() {
                    if let Some(s) = slot {
                        poses[j] = poses[j].retract(&Vector6::from_column_slice(&dp.as_slice()[6 * s..6 * s + 6]));
                    }
                }
                let mut points = self.points.clone();
                for (i, step) in &dl {
                    points[*i] += step;
                }
                let new_cost = self.cost_with(&poses, &points, &sigmas, k, cfg);
                if new_cost < cost {
                    assert!(new_cost <= cost, "accepted step increased the cost");
                    self.poses = poses;
                    self.points = points;
                    let rel = (cost - new_cost) / cost.max(f64::MIN_POSITIVE);
                    cost = new_cost;
                    history.push(cost);
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if rel < cfg.min_relative_decrease {
                        return BaReport {
                            initial_cost: initial,
                            final_cost: cost,
                            cost_history: history,
                            iterations,
                        };
                    }
                } else {
                    lambda *= 4.0;
                }
            }
            if !accepted {
                break;
            }
        }
        BaReport {
            initial_cost: initial,
            final_cost: cost,
            cost_history: history,
            iterations,
        }
    }

    fn linearize(&self, k: &CameraIntrinsics, cfg: &BaConfig, sigmas: &[Option<f64>], free_pose: &[Option<usize>], n_free: usize) -> NormalSystem {
        let mut hpp = vec![nalgebra::Matrix6::<f64>::zeros(); n_free];
        let mut gp = vec![Vector6::<f64>::zeros(); n_free];
        let mut hll: BTreeMap<usize, (Matrix3<f64>, Vector3<f64>)> = BTreeMap::new();
        let mut hpl: BTreeMap<(usize, usize), Matrix6x3<f64>> = BTreeMap::new();
        for (&(j, i, ref u, d), sigma) in self.observations.iter().zip(sigmas) {
            let pose = &self.poses[j];
            let p = &self.points[i];
            let slot = free_pose[j];
            let active = !self.point_fixed[i];
            // A one-row residual is passed with a zero second row.
            let mut add = |jpose: Matrix2x6<f64>, jpt: Matrix2x3<f64>, r: Vector2<f64>, w: f64| {
                if let Some(s) = slot {
                    hpp[s] += w * jpose.transpose() * &jpose;
                    gp[s] += w * jpose.transpose() * &r;
                }
                if active {
                    let e = hll.entry(i).or_insert((Matrix3::zeros(), Vector3::zeros()));
                    e.0 += w * jpt.transpose() * &jpt;
                    e.1 += w * jpt.transpose() * &r;
                    if let Some(s) = slot {
                        *hpl.entry((s, i)).or_insert_with(Matrix6x3::zeros) += w * jpose.transpose() * &jpt;
                    }
                }
            };
            let Some(r) = reprojection_residual(pose, p, u, k) else { continue };
            let (jpose, jpt) = reprojection_jacobians(pose, p, k);
            let s = r.norm();
            let w = if s <= cfg.huber_delta_px { 1.0 } else { cfg.huber_delta_px / s };
            add(jpose, jpt, r, w);
            if let (Some(sigma), Some(d)) = (*sigma, d) {
                let rd = depth_residual(pose, p, d, sigma);
                let (jdp, jdl) = depth_jacobians(pose, p, sigma);
                let mut jpose2 = Matrix2x6::zeros();
                jpose2.row_mut(0).copy_from(&jdp);
                let mut jpt2 = Matrix2x3::zeros();
                jpt2.row_mut(0).copy_from(&jdl);
                add(jpose2, jpt2, Vector2::new(rd, 0.0), 1.0);
            }
        }
        NormalSystem { hpp, gp, hll, hpl }
    }
}

struct NormalSystem {
    hpp: Vec<nalgebra::Matrix6<f64>>,
    gp: Vec<Vector6<f64>>,
    hll: BTreeMap<usize, (Matrix3<f64>, Vector3<f64>)>,
    hpl: BTreeMap<(usize, usize), Matrix6x3<f64>>,
}

fn damp3(h: &Matrix3<f64>, lambda: f64) -> Matrix3<f64> {
    let mut out = *h;
    for d in 0..3 {
        out[(d, d)] += lambda * h[(d, d)].max(1e-6);
    }
    out
}

impl NormalSystem {
    /// Solves the damped system; returns pose steps (stacked) and point steps.
    fn solve(&self, lambda: f64) -> Option<(DVector<f64>, Vec<(usize, Vector3<f64>)>)> {
        let n = self.hpp.len();
        let mut inv_ll: BTreeMap<usize, Matrix3<f64>> = BTreeMap::new();
        for (&i, (h, _)) in &self.hll {
            inv_ll.insert(i, damp3(h, lambda).try_inverse()?);
        }
        let mut s = DMatrix::<f64>::zeros(6 * n, 6 * n);
        let mut b = DVector::<f64>::zeros(6 * n);
        for j in 0..n {
            let mut h = self.hpp[j];
            for d in 0..6 {
                h[(d, d)] += lambda * h[(d, d)].max(1e-6);
            }
            s.fixed_view_mut::<6, 6>(6 * j, 6 * j).copy_from(&h);
            b.fixed_rows_mut::<6>(6 * j).copy_from(&(-self.gp[j]));
        }
        // Group pose-point blocks by point for the Schur complement.
        let mut by_point: BTreeMap<usize, Vec<(usize, &Matrix6x3<f64>)>> = BTreeMap::new();
        for (&(j, i), w) in &self.hpl {
            by_point.entry(i).or_default().push((j, w));
        }
        for (i, blocks) in &by_point {
            let c_inv = &inv_ll[i];
            let gl = &self.hll[i].1;
            for &(j, wj) in blocks {
                let wc = wj * c_inv;
                let mut bj = b.fixed_rows_mut::<6>(6 * j);
                bj += wc * gl;
                for &(l, wl) in blocks {
                    let mut blk = s.fixed_view_mut::<6, 6>(6 * j, 6 * l);
                    blk -= wc * wl.transpose();
                }
            }
        }
        let dp = if n > 0 {
            match s.clone().cholesky() {
                Some(c) => c.solve(&b),
                None => s.lu().solve(&b)?,
            }
        } else {
            DVector::zeros(0)
        };
        let mut dl = Vec::with_capacity(self.hll.len());
        for (&i, (_, gl)) in &self.hll {
            let mut rhs = -gl;
            if let Some(blocks) = by_point.get(&i) {
                for &(j, w) in blocks {
                    rhs -= w.transpose() * dp.fixed_rows::<6>(6 * j);
                }
            }
            dl.push((i, inv_ll[&i] * rhs));
        }
        Some((dp, dl))
    }
}

/// Optimises the last `cfg.window` keyframes and the points they observe,
/// holding the oldest keyframe of the window fixed. Earlier keyframes that
/// observe those points add their residuals with fixed poses.
///
/// Points observed only once and without a depth prior stay fixed since they
/// are unconstrained along their ray.
pub fn local_bundle_adjustment(map: &mut WorldMap, k: &CameraIntrinsics, cfg: &BaConfig) -> BaReport {
    let n_kf = map.keyframes.len();
    let start = n_kf.saturating_sub(cfg.window.max(1));
    let mut point_index: BTreeMap<u64, usize> = BTreeMap::new();
    let mut problem = BaProblem {
        poses: Vec::new(),
        fixed: Vec::new(),
        points: Vec::new(),
        point_fixed: Vec::new(),
        observations: Vec::new(),
    };
    let mut support: Vec<(usize, bool)> = Vec::new();
    for (w, kf) in map.keyframes[start..].iter().enumerate() {
        problem.poses.push(kf.pose);
        problem.fixed.push(w == 0);
        for o in &kf.observations {
            let Some(mp) = map.points.get(&o.point_id) else { continue };
            let idx = *point_index.entry(o.point_id).or_insert_with(|| {
                problem.points.push(mp.position);
                support.push((0, false));
                problem.points.len() - 1
            });
            support[idx].0 += 1;
            let depth = if cfg.depth_prior.is_some() { o.depth } else { None };
            support[idx].1 |= depth.is_some();
            problem.observations.push((w, idx, o.pixel, depth));
        }
    }
    // Older keyframes seeing window points contribute their observations
    // with the pose held fixed.
    let mut outer = Vec::new();
    for kf in &map.keyframes[..start] {
        let obs: Vec<_> = kf
            .observations
            .iter()
            .filter_map(|o| point_index.get(&o.point_id).map(|&idx| (idx, o)))
            .collect();
        if obs.is_empty() {
            continue;
        }
        let w = problem.poses.len();
        problem.poses.push(kf.pose);
        problem.fixed.push(true);
        outer.push(w);
        for (idx, o) in obs {
            support[idx].0 += 1;
            let depth = if cfg.depth_prior.is_some() { o.depth } else { None };
            support[idx].1 |= depth.is_some();
            problem.observations.push((w, idx, o.pixel, depth));
        }
    }
    problem.point_fixed = support.iter().map(|&(n, has_depth)| n < 2 && !has_depth).collect();
    let report = problem.solve(k, cfg);
    for (w, kf) in map.keyframes[start..].iter_mut().enumerate() {
        kf.pose = problem.poses[w];
    }
    for (id, idx) in point_index {
        if let Some(mp) = map.points.get_mut(&id) {
            mp.position = problem.points[idx];
        }
    }
    report
}
