use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use super::EvalError;
use crate::io::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignMode {
    #[default]
    Se3,
    Sim3,
}

impl FromStr for AlignMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "se3" => Ok(Self::Se3),
            "sim3" => Ok(Self::Sim3),
            _ => Err(format!("unknown alignment mode `{s}` (expected se3 or sim3)")),
        }
    }
}

impl fmt::Display for AlignMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Se3 => "se3",
            Self::Sim3 => "sim3",
        })
    }
}

/// Maps estimate coordinates onto ground truth: `gt ≈ s R est + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentResult {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
    pub mode: AlignMode,
}

impl AlignmentResult {
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }
}

/// Closed-form least-squares rigid or similarity alignment (Umeyama).
pub fn umeyama_align(est: &[Vector3<f64>], gt: &[Vector3<f64>], mode: AlignMode) -> Result<AlignmentResult, EvalError> {
    if est.len() != gt.len() {
        return Err(EvalError::Degenerate(format!("{} estimate points vs {} reference points", est.len(), gt.len())));
    }
    let n = est.len();
    if n < 3 {
        return Err(EvalError::Degenerate(format!("{n} points, need at least 3")));
    }
    let nf = n as f64;
    let mu_e = est.iter().sum::<Vector3<f64>>() / nf;
    let mu_g = gt.iter().sum::<Vector3<f64>>() / nf;
    let mut cov = Matrix3::zeros();
    let mut var_e = 0.0;
    for (e, g) in est.iter().zip(gt) {
        let (de, dg) = (e - mu_e, g - mu_g);
        cov += dg * de.transpose();
        var_e += de.norm_squared();
    }
    cov /= nf;
    var_e /= nf;
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= 1e-10 * sv[0] {
        return Err(EvalError::Degenerate("point sets are collinear or coincident".into()));
    }
    // A reflection is undone on the smallest singular direction.
    let mut flip = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        let smallest = (0..3)
            .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
            .unwrap();
        flip[(smallest, smallest)] = -1.0;
    }
    let rotation = u * flip * v_t;
    let scale = match mode {
        AlignMode::Se3 => 1.0,
        AlignMode::Sim3 => {
            let tr: f64 = (0..3).map(|i| svd.singular_values[i] * flip[(i, i)]).sum();
            if !(var_e > 0.0) {
                return Err(EvalError::Degenerate("estimate points coincide".into()));
            }
            tr / var_e
        }
    };
    let translation = mu_g - scale * (rotation * mu_e);
    Ok(AlignmentResult {
        rotation,
        translation,
        scale,
        mode,
    })
}

/// One-to-one nearest-timestamp association. Candidate pairs within
/// `max_dt` are taken greedily in order of time difference; the result is
/// sorted by estimate index.
pub fn associate(est: &Trajectory, gt: &Trajectory, max_dt: f64) -> Vec<(usize, usize)> {
    let gt_t: Vec<f64> = gt.records.iter().map(|r| r.timestamp).collect();
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (i, r) in est.records.iter().enumerate() {
        let start = gt_t.partition_point(|&t| t < r.timestamp - max_dt);
        for (j, &t) in gt_t.iter().enumerate().skip(start) {
            if t > r.timestamp + max_dt {
                break;
            }
            cands.push(((t - r.timestamp).abs(), i, j));
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_e = vec![false; est.len()];
    let mut used_g = vec![false; gt.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in cands {
        if !used_e[i] && !used_g[j] {
            used_e[i] = true;
            used_g[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs
}

#[derive(Debug, Clone, PartialEq)]
pub struct AteResult {
    pub rmse: f64,
    pub median: f64,
    pub max: f64,
    pub pairs: usize,
    pub alignment: AlignmentResult,
}

pub const DEFAULT_MAX_DT: f64 = 0.02;

/// Absolute trajectory error over camera positions after alignment.
pub fn ate_rmse(est: &Trajectory, gt: &Trajectory, mode: AlignMode, max_dt: f64) -> Result<AteResult, EvalError> {
    let pairs = associate(est, gt, max_dt);
    if pairs.len() < 3 {
        return Err(EvalError::Data(format!(
            "only {} poses associated within {max_dt} s, need at least 3",
            pairs.len()
        )));
    }
    let e: Vec<Vector3<f64>> = pairs.iter().map(|&(i, _)| est.records[i].pose.translation).collect();
    let g: Vec<Vector3<f64>> = pairs.iter().map(|&(_, j)| gt.records[j].pose.translation).collect();
    let alignment = umeyama_align(&e, &g, mode)?;
    let mut res: Vec<f64> = e.iter().zip(&g).map(|(e, g)| (g - alignment.apply(e)).norm()).collect();
    let rmse = (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt();
    res.sort_by(f64::total_cmp);
    let n = res.len();
    let median = if n % 2 == 1 { res[n / 2] } else { 0.5 * (res[n / 2 - 1] + res[n / 2]) };
    Ok(AteResult {
        rmse,
        median,
        max: res[n - 1],
        pairs: n,
        alignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use nalgebra::{Matrix4, Rotation3, SymmetricEigen, UnitQuaternion};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            .collect()
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        *Rotation3::from_scaled_axis(axis.normalize() * rng.random_range(0.0..3.1)).matrix()
    }

    fn traj(points: &[Vector3<f64>], dt: f64) -> Trajectory {
        let mut t = Trajectory::new();
        for (i, p) in points.iter().enumerate() {
            t.push(i as f64 * dt, Pose::from_translation(*p));
        }
        t
    }

    /// Horn's quaternion method: rotation from the top eigenvector of a 4x4
    /// symmetric matrix, scale from the ratio of spreads.
    fn horn(est: &[Vector3<f64>], gt: &[Vector3<f64>], sim3: bool) -> (Matrix3<f64>, Vector3<f64>, f64) {
        let n = est.len() as f64;
        let me = est.iter().sum::<Vector3<f64>>() / n;
        let mg = gt.iter().sum::<Vector3<f64>>() / n;
        let mut m = Matrix3::zeros();
        for (e, g) in est.iter().zip(gt) {
            m += (e - me) * (g - mg).transpose();
        }
        let (sxx, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
        let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
        let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
        #[rustfmt::skip]
        let nm = Matrix4::new(
            sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
            syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
            szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
            sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz,
        );
        let eig = SymmetricEigen::new(nm);
        let best = (0..4).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
        let q = eig.eigenvectors.column(best);
        let r = *UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]))
            .to_rotation_matrix()
            .matrix();
        let s = if sim3 {
            let num: f64 = est.iter().zip(gt).map(|(e, g)| (g - mg).dot(&(r * (e - me)))).sum();
            let den: f64 = est.iter().map(|e| (e - me).norm_squared()).sum();
            num / den
        } else {
            1.0
        };
        (r, mg - s * r * me, s)
    }

    fn brute_ate(est: &Trajectory, gt: &Trajectory, max_dt: f64, sim3: bool) -> f64 {
        // Quadratic association with the same greedy order.
        let mut c = Vec::new();
        for (i, a) in est.records.iter().enumerate() {
            for (j, b) in gt.records.iter().enumerate() {
                let d = (a.timestamp - b.timestamp).abs();
                if d <= max_dt {
                    c.push((d, i, j));
                }
            }
        }
        c.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let (mut ue, mut ug) = (vec![false; est.len()], vec![false; gt.len()]);
        let (mut e, mut g) = (Vec::new(), Vec::new());
        for (_, i, j) in c {
            if !ue[i] && !ug[j] {
                ue[i] = true;
                ug[j] = true;
                e.push(est.records[i].pose.translation);
                g.push(gt.records[j].pose.translation);
            }
        }
        let (r, t, s) = horn(&e, &g, sim3);
        let sum: f64 = e.iter().zip(&g).map(|(e, g)| (g - (s * r * e + t)).norm_squared()).sum();
        (sum / e.len() as f64).sqrt()
    }

    #[test]
    fn identical_points_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_points(&mut rng, 20);
        let a = umeyama_align(&p, &p, AlignMode::Sim3).unwrap();
        assert!((a.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!((a.scale - 1.0).abs() < 1e-12);
        assert!(a.translation.norm() < 1e-12);
    }

    #[test]
    fn recovers_constructed_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let est = random_points(&mut rng, 30);
        let r0 = random_rotation(&mut rng);
        let t0 = Vector3::new(0.3, -1.2, 2.0);
        let gt: Vec<_> = est.iter().map(|p| 2.0 * r0 * p + t0).collect();
        let a = umeyama_align(&est, &gt, AlignMode::Sim3).unwrap();
        assert!((a.scale - 2.0).abs() < 1e-9);
        assert!((a.rotation - r0).norm() < 1e-9);
        assert!((a.translation - t0).norm() < 1e-9);
    }

    #[test]
    fn thousand_random_similarities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let n = rng.random_range(3..40);
            let est = random_points(&mut rng, n);
            let r0 = random_rotation(&mut rng);
            let s0 = rng.random_range(0.2..5.0);
            let t0 = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let gt: Vec<_> = est.iter().map(|p| s0 * r0 * p + t0).collect();
            let a = umeyama_align(&est, &gt, AlignMode::Sim3).unwrap();
            assert!((a.scale - s0).abs() < 1e-9);
            assert!((a.rotation - r0).norm() < 1e-9);
            assert!((a.translation - t0).norm() < 1e-9);
            assert!((a.rotation.determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn reflection_is_excluded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let est = random_points(&mut rng, 10);
        let gt: Vec<_> = est.iter().map(|p| Vector3::new(-p.x, p.y, p.z)).collect();
        let a = umeyama_align(&est, &gt, AlignMode::Se3).unwrap();
        assert!((a.rotation.determinant() - 1.0).abs() < 1e-9);
        assert!((a.rotation * a.rotation.transpose() - Matrix3::identity()).norm() < 1e-9);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let p: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(umeyama_align(&p, &p, AlignMode::Se3), Err(EvalError::Degenerate(_))));
        assert!(umeyama_align(&p[..2], &p[..2], AlignMode::Se3).is_err());
    }

    #[test]
    fn ate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_points(&mut rng, 50);
        let gt = traj(&p, 0.1);
        assert!(ate_rmse(&gt, &gt, AlignMode::Se3, DEFAULT_MAX_DT).unwrap().rmse < 1e-12);
        let shifted: Vec<_> = p.iter().map(|x| x + Vector3::new(0.1, 0.0, 0.0)).collect();
        let r = ate_rmse(&traj(&shifted, 0.1), &gt, AlignMode::Se3, DEFAULT_MAX_DT).unwrap();
        assert!(r.rmse < 1e-12);
        assert_eq!(r.pairs, 50);
    }

    #[test]
    fn unit_square_matches_brute_force() {
        let sq = [
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
        ];
        let mut est = sq;
        est[2] += Vector3::new(0.2, 0.0, 0.0);
        let (e, g) = (traj(&est, 1.0), traj(&sq, 1.0));
        let r = ate_rmse(&e, &g, AlignMode::Se3, DEFAULT_MAX_DT).unwrap();
        let b = brute_ate(&e, &g, DEFAULT_MAX_DT, false);
        assert!(r.rmse > 0.0);
        assert!((r.rmse - b).abs() < 1e-12, "{} vs {b}", r.rmse);
    }

    #[test]
    fn random_trajectories_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for case in 0..100 {
            let n = rng.random_range(5..60);
            let g = random_points(&mut rng, n);
            let r0 = random_rotation(&mut rng);
            let e: Vec<_> = g
                .iter()
                .map(|p| r0 * p * 1.3 + Vector3::new(1.0, 2.0, 3.0) + Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), 0.0))
                .collect();
            let mut et = traj(&e, 0.1);
            // Jitter estimate timestamps inside the association window.
            for r in &mut et.records {
                r.timestamp += rng.random_range(-0.005..0.005);
            }
            let gt = traj(&g, 0.1);
            let sim3 = case % 2 == 0;
            let mode = if sim3 { AlignMode::Sim3 } else { AlignMode::Se3 };
            let a = ate_rmse(&et, &gt, mode, DEFAULT_MAX_DT).unwrap().rmse;
            let b = brute_ate(&et, &gt, DEFAULT_MAX_DT, sim3);
            assert!((a - b).abs() < 1e-12, "case {case}: {a} vs {b}");
        }
    }

    #[test]
    fn disjoint_timestamps_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_points(&mut rng, 10);
        let a = traj(&p, 0.1);
        let mut b = a.clone();
        for r in &mut b.records {
            r.timestamp += 100.0;
        }
        assert!(matches!(ate_rmse(&a, &b, AlignMode::Se3, DEFAULT_MAX_DT), Err(EvalError::Data(_))));
    }

    #[test]
    fn association_is_one_to_one() {
        let a = traj(&random_points(&mut ChaCha8Rng::seed_from_u64(8), 5), 0.01);
        let b = traj(&random_points(&mut ChaCha8Rng::seed_from_u64(9), 5), 0.01);
        let pairs = associate(&a, &b, 0.02);
        assert_eq!(pairs, (0..5).map(|i| (i, i)).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn ate_invariant_under_pre_transformation(seed in 0u64..10_000, s in 0.3f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_points(&mut rng, 20);
            let e: Vec<_> = g.iter().map(|p| p + Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1))).collect();
            let r = random_rotation(&mut rng);
            let t = Vector3::new(rng.random_range(-3.0..3.0), 0.5, -1.0);
            let gt = traj(&g, 0.1);
            let base_se3 = ate_rmse(&traj(&e, 0.1), &gt, AlignMode::Se3, DEFAULT_MAX_DT).unwrap().rmse;
            let rigid: Vec<_> = e.iter().map(|p| r * p + t).collect();
            let moved = ate_rmse(&traj(&rigid, 0.1), &gt, AlignMode::Se3, DEFAULT_MAX_DT).unwrap().rmse;
            prop_assert!((base_se3 - moved).abs() < 1e-9);
            let base_sim3 = ate_rmse(&traj(&e, 0.1), &gt, AlignMode::Sim3, DEFAULT_MAX_DT).unwrap().rmse;
            let similar: Vec<_> = e.iter().map(|p| s * (r * p) + t).collect();
            let moved = ate_rmse(&traj(&similar, 0.1), &gt, AlignMode::Sim3, DEFAULT_MAX_DT).unwrap().rmse;
            prop_assert!((base_sim3 - moved).abs() < 1e-9);
        }
    }
}
