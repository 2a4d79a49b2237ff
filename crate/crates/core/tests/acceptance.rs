//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use mdslam::backend::*;
use mdslam::cli::experiments::*;
use mdslam::descriptor::Descriptor;
use mdslam::evaluation::*;
use mdslam::frontend::process_frame;
use mdslam::geometry::{backproject, project, CameraIntrinsics, Pixel, Point3, Pose};
use mdslam::io::*;
use mdslam::sensors::{DepthNoiseModel, SensorNoise};
use mdslam::simulator::{SceneConfig, PERSON_CLASS};
use nalgebra::{DMatrix, Matrix3, Matrix4, SymmetricEigen, UnitQuaternion, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_pose(rng: &mut ChaCha8Rng, rot: f64, trans: f64) -> Pose {
    let w = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let t = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    Pose::new(UnitQuaternion::from_scaled_axis(w * rot), t * trans)
}

/// Every BA report seen by the suite must have a non-increasing cost history.
#[derive(Default)]
struct BaHealth {
    solves: usize,
    violations: usize,
}

impl BaHealth {
    fn report(&mut self, r: &BaReport) {
        self.solves += 1;
        if r.cost_history.windows(2).any(|w| w[1] > w[0]) {
            self.violations += 1;
        }
    }

    fn run(&mut self, d: &Diagnostics) {
        self.solves += d.ba_runs;
        if !d.ba_monotone {
            self.violations += 1;
        }
    }
}

fn static_oracle(ba: &mut BaHealth) -> Outcome {
    let cfg = SceneConfig::default();
    let start = Instant::now();
    let r = render(&cfg, 0).unwrap();
    let res = run_slam(&r, &SensorNoise::default(), 0, &TrackerConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    ba.run(&res.diagnostics);
    let ate = ate_rmse(&res.trajectory, &r.groundtruth, AlignMode::Se3, DEFAULT_MAX_DT).unwrap();
    let pass = r.frames.len() == 300 && cfg.landmarks == 1500 && ate.rmse <= 0.005 && secs < 120.0;
    outcome(
        pass,
        format!("{} frames, ATE {:.2e} m (<= 0.005), {secs:.1} s (< 120)", res.trajectory.len(), ate.rmse),
    )
}

/// Fraction of sensor keypoints that fall on a dynamic instance.
fn dynamic_fraction(r: &Rendered) -> f64 {
    let (mut dynamic, mut total) = (0usize, 0usize);
    for f in r.frames.iter() {
        for kp in &f.keypoints {
            total += 1;
            if let Some((x, y)) = kp.pixel().nearest(f.width(), f.height()) {
                if f.masks.class_of(f.masks.get(x, y)) == Some(PERSON_CLASS) {
                    dynamic += 1;
                }
            }
        }
    }
    dynamic as f64 / total.max(1) as f64
}

fn mask_ablation(ba: &mut BaHealth) -> Outcome {
    let noise = SensorNoise {
        depth: DepthNoiseModel {
            additive_sigma: 0.005,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut ratios = Vec::new();
    let mut fractions = Vec::new();
    for seed in 0..SEEDS {
        let r = render(&dynamic_scene(), seed).unwrap();
        fractions.push(dynamic_fraction(&r));
        let tc = TrackerConfig {
            seed,
            ..Default::default()
        };
        let mut no_mask = tc.clone();
        no_mask.frontend.masking = false;
        let mut ate = [0.0; 2];
        for (slot, cfg) in ate.iter_mut().zip([&tc, &no_mask]) {
            *slot = match run_slam(&r, &noise, seed, cfg) {
                Ok(res) if !res.diagnostics.aborted => {
                    ba.run(&res.diagnostics);
                    ate_rmse(&res.trajectory, &r.groundtruth, AlignMode::Se3, DEFAULT_MAX_DT).map_or(f64::INFINITY, |a| a.rmse)
                }
                _ => f64::INFINITY,
            };
        }
        ratios.push(ate[1] / ate[0]);
    }
    let ratio = median(&ratios);
    let frac = fractions.iter().sum::<f64>() / fractions.len() as f64;
    outcome(
        ratio >= 5.0 && (0.2..=0.4).contains(&frac),
        format!("median ATE(no-mask)/ATE(mask) {ratio:.1} (>= 5), dynamic keypoints {:.0}%", 100.0 * frac),
    )
}

fn temporal_consistency() -> Outcome {
    let (mut low_ate, mut high_ate) = (Vec::new(), Vec::new());
    let (mut low_rmse, mut high_rmse) = (Vec::new(), Vec::new());
    let (mut low_cv, mut high_cv) = (Vec::new(), Vec::new());
    for seed in 0..SEEDS {
        let r = render(&SceneConfig::default(), seed).unwrap();
        let (low, high) = matched_noise_pair(&r, 0.05, 0.15, CONSISTENCY_PHI, 1000 + seed);
        let tc = TrackerConfig {
            seed,
            ..Default::default()
        };
        for (depth, ate, rmse, cvs) in [
            (low, &mut low_ate, &mut low_rmse, &mut low_cv),
            (high, &mut high_ate, &mut high_rmse, &mut high_cv),
        ] {
            let noise = SensorNoise {
                depth,
                ..Default::default()
            };
            let m = run_metered(&r, &noise, seed, &tc, AlignMode::Se3).unwrap();
            ate.push(m.ate);
            rmse.push(m.mean_depth_rmse);
            cvs.push(m.scale_cv);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let rmse_gap = (mean(&high_rmse) / mean(&low_rmse) - 1.0).abs();
    let ratio = median(&high_ate) / median(&low_ate);
    outcome(
        rmse_gap <= 0.05 && ratio >= 1.5,
        format!(
            "depth RMSE {:.3} vs {:.3} m (gap {:.1}% <= 5%), scale CV {:.3} vs {:.3}, median ATE {:.4} vs {:.4} m, ratio {ratio:.2} (>= 1.5)",
            mean(&low_rmse),
            mean(&high_rmse),
            100.0 * rmse_gap,
            mean(&low_cv),
            mean(&high_cv),
            median(&low_ate),
            median(&high_ate),
        ),
    )
}

fn clip_sweep() -> Outcome {
    let grid = [3.0, 5.0, 7.5, 10.0, 15.0];
    let noise = SensorNoise {
        depth: DepthNoiseModel {
            rel_sigma: CLIP_SWEEP_REL_SIGMA,
            distance_bias_gain: CLIP_SWEEP_BIAS_GAIN,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut per_d = vec![Vec::new(); grid.len()];
    let mut raw = Vec::new();
    for seed in 0..SEEDS {
        let r = render(&large_room_scene(), seed).unwrap();
        let tc = TrackerConfig {
            seed,
            ..Default::default()
        };
        for (i, &d) in grid.iter().enumerate() {
            per_d[i].push(run_ate(&r, &noise, seed, &clipped(&tc, d), AlignMode::Se3));
        }
        raw.push(run_ate(&r, &noise, seed, &clipped(&tc, f64::INFINITY), AlignMode::Se3));
    }
    let medians: Vec<f64> = per_d.iter().map(|v| median(v)).collect();
    let raw = median(&raw);
    let (best_i, best) = medians
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .unwrap();
    let table: Vec<String> = grid.iter().zip(&medians).map(|(d, a)| format!("{d}m {a:.4}")).collect();
    outcome(
        best <= raw,
        format!("median ATE {} raw {raw:.4}; best {} m {best:.4} <= raw", table.join(", "), grid[best_i]),
    )
}

fn scale_anchoring(ba: &mut BaHealth) -> Outcome {
    let mut on = Vec::new();
    let mut off = Vec::new();
    let mut on_mis = Vec::new();
    for seed in 0..3 {
        let r = render(&SceneConfig::default(), seed).unwrap();
        let tc = TrackerConfig {
            seed,
            ..Default::default()
        };
        let mut no_prior = tc.clone();
        no_prior.ba.depth_prior = None;
        let depth = DepthNoiseModel {
            rel_sigma: 0.02,
            ..Default::default()
        };
        for (cfg, init, out) in [(&tc, 1.0, &mut on), (&no_prior, 1.2, &mut off), (&tc, 1.2, &mut on_mis)] {
            let noise = SensorNoise {
                depth,
                init_depth_scale: init,
                ..Default::default()
            };
            let res = run_slam(&r, &noise, seed, cfg).unwrap();
            ba.run(&res.diagnostics);
            let a = ate_rmse(&res.trajectory, &r.groundtruth, AlignMode::Sim3, DEFAULT_MAX_DT).unwrap();
            out.push(a.alignment.scale);
        }
    }
    let (s_on, s_off) = (median(&on), median(&off));
    outcome(
        (0.99..=1.01).contains(&s_on) && (s_off - 1.0).abs() > 0.05,
        format!(
            "Sim(3) scale priors on {s_on:.4} (in [0.99, 1.01]), priors off with x1.2 init {s_off:.4} (deviation > 5%); priors on with x1.2 init {:.4}",
            median(&on_mis)
        ),
    )
}

fn drift_exponents() -> Outcome {
    let slope = |model, seed| {
        let cfg = DriftConfig {
            frames: 1024,
            trials: 10_000,
            model,
            step_sigma: 0.01,
        };
        drift_variance_mc(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().slope.unwrap()
    };
    let iid = slope(DriftModel::Iid, 1);
    let corr = slope(DriftModel::Ar1 { phi: 1.0 }, 2);
    outcome(
        (iid - 0.5).abs() <= 0.05 && (corr - 1.0).abs() <= 0.05,
        format!("slope iid {iid:.3} (0.5 +- 0.05), phi=1 {corr:.3} (1.0 +- 0.05)"),
    )
}

/// Horn's closed-form absolute orientation, used as an independent oracle.
fn horn(est: &[Vector3<f64>], gt: &[Vector3<f64>], sim3: bool) -> (Matrix3<f64>, Vector3<f64>, f64) {
    let n = est.len() as f64;
    let me = est.iter().sum::<Vector3<f64>>() / n;
    let mg = gt.iter().sum::<Vector3<f64>>() / n;
    let mut m = Matrix3::zeros();
    for (e, g) in est.iter().zip(gt) {
        m += (e - me) * (g - mg).transpose();
    }
    let s = |r: usize, c: usize| m[(r, c)];
    #[rustfmt::skip]
    let nm = Matrix4::new(
        s(0, 0) + s(1, 1) + s(2, 2), s(1, 2) - s(2, 1), s(2, 0) - s(0, 2), s(0, 1) - s(1, 0),
        s(1, 2) - s(2, 1), s(0, 0) - s(1, 1) - s(2, 2), s(0, 1) + s(1, 0), s(2, 0) + s(0, 2),
        s(2, 0) - s(0, 2), s(0, 1) + s(1, 0), -s(0, 0) + s(1, 1) - s(2, 2), s(1, 2) + s(2, 1),
        s(0, 1) - s(1, 0), s(2, 0) + s(0, 2), s(1, 2) + s(2, 1), -s(0, 0) - s(1, 1) + s(2, 2),
    );
    let eig = SymmetricEigen::new(nm);
    let best = (0..4).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
    let q = eig.eigenvectors.column(best);
    let r = *UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]))
        .to_rotation_matrix()
        .matrix();
    let scale = if sim3 {
        let num: f64 = est.iter().zip(gt).map(|(e, g)| (g - mg).dot(&(r * (e - me)))).sum();
        num / est.iter().map(|e| (e - me).norm_squared()).sum::<f64>()
    } else {
        1.0
    };
    (r, mg - scale * r * me, scale)
}

fn solver_oracles() -> Outcome {
    let k = CameraIntrinsics::tum_like();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // P3P on 1000 synthesized poses.
    let mut p3p_worst: f64 = 0.0;
    for _ in 0..1000 {
        let pose = random_pose(&mut rng, 1.0, 1.0);
        let inv = pose.inverse();
        let mut world = [Point3::origin(); 3];
        let mut px = [Pixel::new(0.0, 0.0); 3];
        for i in 0..3 {
            let u = Pixel::new(rng.random_range(40.0..600.0), rng.random_range(40.0..440.0));
            px[i] = u;
            world[i] = inv.transform(&backproject(u, rng.random_range(1.0..6.0), &k).unwrap());
        }
        let err = p3p_solve(&world, &px, &k)
            .iter()
            .map(|s| s.rotation_angle_to(&pose).max(s.translation_distance_to(&pose)))
            .fold(f64::INFINITY, f64::min);
        p3p_worst = p3p_worst.max(err);
    }

    // PnP-RANSAC with 40% outliers and 0.5 px pixel noise.
    let mut pnp_rot: f64 = 0.0;
    let mut pnp_trans: f64 = 0.0;
    for trial in 0..20 {
        let pose = random_pose(&mut rng, 0.5, 0.5);
        let inv = pose.inverse();
        let mut corr = Vec::new();
        for i in 0..200 {
            let u = Pixel::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
            let p = inv.transform(&backproject(u, rng.random_range(1.0..6.0), &k).unwrap());
            let obs = if i % 5 < 2 {
                Pixel::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0))
            } else {
                Pixel::new(u.u + rng.random_range(-0.5..0.5), u.v + rng.random_range(-0.5..0.5))
            };
            corr.push((p, obs));
        }
        let mut r = ChaCha8Rng::seed_from_u64(trial);
        let res = pnp_ransac(&corr, &k, &RansacParams::default(), &mut r).unwrap();
        pnp_rot = pnp_rot.max(res.pose.rotation_angle_to(&pose).to_degrees());
        pnp_trans = pnp_trans.max(res.pose.translation_distance_to(&pose));
    }

    // Umeyama on 1000 constructed similarities.
    let mut sim_worst: f64 = 0.0;
    for _ in 0..1000 {
        let pts: Vec<Vector3<f64>> = (0..20).map(|_| Vector3::from_fn(|_, _| rng.random_range(-5.0..5.0))).collect();
        let rot = UnitQuaternion::from_scaled_axis(Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0)));
        let t = Vector3::from_fn(|_, _| rng.random_range(-10.0..10.0));
        let s = rng.random_range(0.2..5.0);
        let gt: Vec<Vector3<f64>> = pts.iter().map(|p| s * (rot * p) + t).collect();
        let a = umeyama_align(&pts, &gt, AlignMode::Sim3).unwrap();
        let err = (a.rotation - rot.to_rotation_matrix().matrix()).norm()
            .max((a.translation - t).norm())
            .max((a.scale - s).abs());
        sim_worst = sim_worst.max(err);
    }

    // ATE against a brute-force Horn alignment on 100 trajectory pairs.
    let mut ate_worst: f64 = 0.0;
    for i in 0..100 {
        let n = rng.random_range(10..60);
        let (mut gt, mut est) = (Trajectory::new(), Trajectory::new());
        let warp = random_pose(&mut rng, 2.0, 3.0);
        let s = if i % 2 == 0 { 1.0 } else { rng.random_range(0.5..2.0) };
        let (mut eg, mut ee) = (Vec::new(), Vec::new());
        for j in 0..n {
            let p = Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0));
            let q = s * (warp.rotation * p) + warp.translation + Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05));
            gt.push(j as f64 * 0.1, Pose::from_translation(p));
            est.push(j as f64 * 0.1, Pose::from_translation(q));
            eg.push(p);
            ee.push(q);
        }
        let sim3 = i % 2 == 1;
        let mode = if sim3 { AlignMode::Sim3 } else { AlignMode::Se3 };
        let got = ate_rmse(&est, &gt, mode, DEFAULT_MAX_DT).unwrap().rmse;
        let (r, t, sc) = horn(&ee, &eg, sim3);
        let sum: f64 = ee.iter().zip(&eg).map(|(e, g)| (g - (sc * r * e + t)).norm_squared()).sum();
        let expected = (sum / n as f64).sqrt();
        ate_worst = ate_worst.max((got - expected).abs());
    }

    let pass = p3p_worst < 1e-5 && pnp_rot < 0.1 && pnp_trans < 1e-3 && sim_worst < 1e-9 && ate_worst < 1e-12;
    outcome(
        pass,
        format!(
            "P3P worst {p3p_worst:.1e} (< 1e-5); PnP-RANSAC 40% outliers worst {pnp_rot:.4} deg / {:.3} mm (< 0.1 deg / 1 mm); Umeyama worst {sim_worst:.1e} (< 1e-9); ATE vs Horn worst {ate_worst:.1e} (< 1e-12)",
            1e3 * pnp_trans
        ),
    )
}

/// Three cameras observing `n` points with exact data; the first camera is fixed.
fn ba_problem(n: usize, rng: &mut ChaCha8Rng, k: &CameraIntrinsics) -> BaProblem {
    let poses: Vec<Pose> = (0..3)
        .map(|j| if j == 0 { Pose::identity() } else { random_pose(rng, 0.1, 0.1) })
        .collect();
    let (mut points, mut observations) = (Vec::new(), Vec::new());
    while points.len() < n {
        let u = Pixel::new(rng.random_range(50.0..590.0), rng.random_range(50.0..430.0));
        let p = backproject(u, rng.random_range(2.0..5.0), k).unwrap();
        let obs: Vec<_> = poses
            .iter()
            .enumerate()
            .filter_map(|(j, pose)| {
                let pc = pose.transform(&p);
                project(&pc, k).ok().filter(|q| k.contains(q)).map(|q| (j, points.len(), q, Some(pc.z)))
            })
            .collect();
        if obs.len() == 3 {
            points.push(p);
            observations.extend(obs);
        }
    }
    BaProblem {
        fixed: vec![true, false, false],
        poses,
        point_fixed: vec![false; n],
        points,
        observations,
    }
}

fn ba_health(ba: &mut BaHealth) -> Outcome {
    let k = CameraIntrinsics::tum_like();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let h = 1e-6;
    let rel = |a: &DMatrix<f64>, b: &DMatrix<f64>| (a - b).norm() / a.norm().max(b.norm()).max(1e-12);
    let mut jac_worst: f64 = 0.0;
    for _ in 0..1000 {
        let pose = random_pose(&mut rng, 0.5, 1.0);
        let u0 = Pixel::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
        let p = pose.inverse().transform(&backproject(u0, rng.random_range(0.5..8.0), &k).unwrap());
        let u = Pixel::new(u0.u + rng.random_range(-3.0..3.0), u0.v + rng.random_range(-3.0..3.0));
        let d = rng.random_range(0.5..8.0);
        let sigma = 0.05 * d;
        let (jp, jl) = reprojection_jacobians(&pose, &p, &k);
        let (dp, dl) = depth_jacobians(&pose, &p, sigma);
        let (mut fp, mut fdp) = (DMatrix::zeros(2, 6), DMatrix::zeros(1, 6));
        for c in 0..6 {
            let mut e = Vector6::zeros();
            e[c] = h;
            let (a, b) = (pose.retract(&e), pose.retract(&(-e)));
            let r = (reprojection_residual(&a, &p, &u, &k).unwrap() - reprojection_residual(&b, &p, &u, &k).unwrap()) / (2.0 * h);
            fp[(0, c)] = r[0];
            fp[(1, c)] = r[1];
            fdp[(0, c)] = (depth_residual(&a, &p, d, sigma) - depth_residual(&b, &p, d, sigma)) / (2.0 * h);
        }
        let (mut fl, mut fdl) = (DMatrix::zeros(2, 3), DMatrix::zeros(1, 3));
        for c in 0..3 {
            let mut e = Vector3::zeros();
            e[c] = h;
            let r = (reprojection_residual(&pose, &(p + e), &u, &k).unwrap()
                - reprojection_residual(&pose, &(p - e), &u, &k).unwrap())
                / (2.0 * h);
            fl[(0, c)] = r[0];
            fl[(1, c)] = r[1];
            fdl[(0, c)] = (depth_residual(&pose, &(p + e), d, sigma) - depth_residual(&pose, &(p - e), d, sigma)) / (2.0 * h);
        }
        let errs = [
            rel(&DMatrix::from_fn(2, 6, |r, c| jp[(r, c)]), &fp),
            rel(&DMatrix::from_fn(2, 3, |r, c| jl[(r, c)]), &fl),
            rel(&DMatrix::from_fn(1, 6, |_, c| dp[c]), &fdp),
            rel(&DMatrix::from_fn(1, 3, |_, c| dl[c]), &fdl),
        ];
        jac_worst = errs.iter().fold(jac_worst, |a, &b| a.max(b));
    }

    let mut recover_worst: f64 = 0.0;
    for _ in 0..10 {
        let mut pb = ba_problem(60, &mut rng, &k);
        let i = rng.random_range(0..60);
        let truth = pb.points[i];
        let dir = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
        pb.points[i] += 0.05 * dir;
        let rep = pb.solve(&k, &BaConfig::default());
        ba.report(&rep);
        recover_worst = recover_worst.max((pb.points[i] - truth).norm());
    }
    for _ in 0..20 {
        let mut pb = ba_problem(80, &mut rng, &k);
        for j in 1..3 {
            pb.poses[j] = pb.poses[j].retract(&Vector6::from_fn(|_, _| rng.random_range(-0.02..0.02)));
        }
        for p in pb.points.iter_mut() {
            *p += Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05));
        }
        ba.report(&pb.solve(&k, &BaConfig::default()));
    }

    outcome(
        jac_worst < 1e-5 && recover_worst < 1e-4 && ba.violations == 0,
        format!(
            "Jacobian worst rel err {jac_worst:.1e} (< 1e-5); 5 cm point restored to {recover_worst:.1e} m (< 1e-4); {} of {} BA solves non-monotone",
            ba.violations, ba.solves
        ),
    )
}

fn round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = 0;
    for _ in 0..1000 {
        let (w, h) = (rng.random_range(1..32), rng.random_range(1..32));
        let depth = DepthRaster::from_values(
            w,
            h,
            (0..w * h).map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.01f32..50.0) }).collect(),
        );
        let bytes = encode_depth(&depth);
        failures += usize::from(decode_depth(&bytes).map(|d| encode_depth(&d)) != Ok(bytes));

        let n = rng.random_range(0..8u16);
        let mask = InstanceMaskRaster {
            width: w,
            height: h,
            instances: (1..=n).map(|id| InstanceInfo { id, class_id: rng.random() }).collect(),
            ids: (0..w * h).map(|_| rng.random_range(0..=n)).collect(),
        };
        let bytes = encode_mask(&mask);
        failures += usize::from(decode_mask(&bytes).map(|m| encode_mask(&m)) != Ok(bytes));

        let kps: Vec<KeypointRecord> = (0..rng.random_range(0..50))
            .map(|_| KeypointRecord {
                u: rng.random_range(0.0..640.0),
                v: rng.random_range(0.0..480.0),
                response: rng.random(),
                octave: rng.random_range(0..=4),
                descriptor: Descriptor::random(&mut rng),
            })
            .collect();
        let bytes = encode_keypoints(&kps);
        failures += usize::from(decode_keypoints(&bytes).map(|k| encode_keypoints(&k)) != Ok(bytes));

        let mut traj = Trajectory::new();
        let mut t = rng.random_range(0.0..1e6);
        for _ in 0..rng.random_range(0..20) {
            t += rng.random_range(1e-3..1.0);
            traj.push(t, random_pose(&mut rng, 3.0, 100.0));
        }
        let text = traj.to_text();
        failures += usize::from(parse_trajectory(&text).map(|p| p.to_text()).ok() != Some(text));
    }

    // Truncation and corruption must be rejected, identically on repeat.
    let mut bad_accepted = 0;
    for _ in 0..200 {
        let depth = encode_depth(&DepthRaster::new(rng.random_range(1..16), rng.random_range(1..16)));
        let mask = encode_mask(&InstanceMaskRaster::empty(rng.random_range(1..16), rng.random_range(1..16)));
        let kps = encode_keypoints(&[KeypointRecord {
            u: 1.0,
            v: 2.0,
            response: 0.5,
            octave: 0,
            descriptor: Descriptor::random(&mut rng),
        }]);
        for (bytes, decode) in [
            (depth, (|b: &[u8]| decode_depth(b).err()) as fn(&[u8]) -> Option<FormatError>),
            (mask, |b: &[u8]| decode_mask(b).err()),
            (kps, |b: &[u8]| decode_keypoints(b).err()),
        ] {
            let cut = rng.random_range(0..bytes.len());
            let mut corrupt = bytes.clone();
            corrupt[rng.random_range(0..4)] ^= 0x5a;
            for b in [&bytes[..cut], &corrupt[..]] {
                let first = decode(b);
                if first.is_none() || first != decode(b) {
                    bad_accepted += 1;
                }
            }
        }
    }
    outcome(
        failures == 0 && bad_accepted == 0,
        format!("{failures} round-trip mismatches in 4 x 1000 cases; {bad_accepted} of 1200 damaged payloads accepted"),
    )
}

fn throughput() -> Outcome {
    let cfg = SceneConfig::default();
    let r = render(&cfg, 0).unwrap();
    let fe = mdslam::frontend::FrontendConfig {
        budget: 1000,
        ..Default::default()
    };
    let start = Instant::now();
    let mut kept = 0usize;
    for f in r.frames.iter() {
        kept += process_frame(f, &fe, &r.intrinsics).observations().count();
    }
    let fps = r.frames.len() as f64 / start.elapsed().as_secs_f64();
    outcome(
        fps >= 30.0,
        format!(
            "{fps:.0} frames/s at {}x{} with budget 1000, {:.0} features/frame (soft floor 30, target 100)",
            cfg.intrinsics.width,
            cfg.intrinsics.height,
            kept as f64 / r.frames.len() as f64
        ),
    )
}

fn main() {
    // Only run under `cargo test`, which passes no filter or a matching one.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if args.iter().any(|a| !"acceptance".contains(a.as_str())) {
        return;
    }
    let mut ba = BaHealth::default();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |n: usize, name: &'static str, o: Outcome| {
        println!("criterion {n:>2} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    record(1, "static-oracle tracking", static_oracle(&mut ba));
    record(2, "mask ablation", mask_ablation(&mut ba));
    record(3, "temporal consistency", temporal_consistency());
    record(4, "clip sweep", clip_sweep());
    record(5, "depth-prior scale anchoring", scale_anchoring(&mut ba));
    record(6, "drift exponents", drift_exponents());
    record(7, "solver oracles", solver_oracles());
    record(8, "BA health", ba_health(&mut ba));
    record(9, "format round trips", round_trips());
    record(10, "front-end throughput", throughput());
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
