//! Three-point resection (Grunert's formulation).
//!
//! The distances `s_i` from the camera centre to the three world points are
//! found from a quartic in `v = s3 / s1`; each real root is polished with
//! Newton's method on the three law-of-cosines equations and the pose is
//! recovered by absolute orientation between the world points and the
//! camera-frame points `s_i * b_i`.

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::geometry::{CameraIntrinsics, Pixel, Point3, Pose};

/// Relative collinearity threshold on the triangle spanned by the world points.
const DEGENERATE_EPS: f64 = 1e-9;

/// Real roots of `c[0] x^4 + c[1] x^3 + c[2] x^2 + c[3] x + c[4]`.
fn quartic_roots(c: [f64; 5]) -> Vec<f64> {
    let lead = c[0];
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Vec::new();
    }
    let roots = if lead.abs() < 1e-14 * scale {
        cubic_like_roots(&c[1..])
    } else {
        // Companion matrix of the monic quartic.
        let a: Vec<f64> = c[1..].iter().map(|v| v / lead).collect();
        let mut m4 = Matrix4::<f64>::zeros();
        for i in 0..4 {
            m4[(0, i)] = -a[i];
        }
        for i in 1..4 {
            m4[(i, i - 1)] = 1.0;
        }
        m4.complex_eigenvalues()
            .iter()
            .filter(|z| z.im.abs() <= 1e-6 * (1.0 + z.re.abs()))
            .map(|z| z.re)
            .collect()
    };
    // Newton polish on the polynomial itself.
    roots
        .into_iter()
        .map(|mut x| {
            for _ in 0..8 {
                let f = (((c[0] * x + c[1]) * x + c[2]) * x + c[3]) * x + c[4];
                let df = ((4.0 * c[0] * x + 3.0 * c[1]) * x + 2.0 * c[2]) * x + c[3];
                if df == 0.0 {
                    break;
                }
                let step = f / df;
                x -= step;
                if step.abs() <= 1e-15 * (1.0 + x.abs()) {
                    break;
                }
            }
            x
        })
        .collect()
}

/// Real roots of a polynomial of degree at most three given highest first.
fn cubic_like_roots(c: &[f64]) -> Vec<f64> {
    let n = c.len() - 1;
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if c[0].abs() < 1e-14 * scale {
        return if n >= 1 { cubic_like_roots(&c[1..]) } else { Vec::new() };
    }
    match n {
        0 => Vec::new(),
        1 => vec![-c[1] / c[0]],
        _ => {
            let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                m[(0, i)] = -c[i + 1] / c[0];
            }
            for i in 1..n {
                m[(i, i - 1)] = 1.0;
            }
            m.complex_eigenvalues()
                .iter()
                .filter(|z| z.im.abs() <= 1e-6 * (1.0 + z.re.abs()))
                .map(|z| z.re)
                .collect()
        }
    }
}

/// Polishes ray distances on `|s_j b_j - s_k b_k|^2 = d_jk^2`.
fn polish(s: Vector3<f64>, cos: &[f64; 3], d2: &[f64; 3]) -> Vector3<f64> {
    // Pairs: (1,2) uses cos[0] and d2[0]; (0,2) cos[1], d2[1]; (0,1) cos[2], d2[2].
    let pairs = [(1, 2), (0, 2), (0, 1)];
    let mut s = s;
    for _ in 0..10 {
        let mut f = Vector3::zeros();
        let mut j = Matrix3::zeros();
        for (r, &(a, b)) in pairs.iter().enumerate() {
            f[r] = s[a] * s[a] + s[b] * s[b] - 2.0 * s[a] * s[b] * cos[r] - d2[r];
            j[(r, a)] = 2.0 * s[a] - 2.0 * s[b] * cos[r];
            j[(r, b)] = 2.0 * s[b] - 2.0 * s[a] * cos[r];
        }
        let Some(step) = j.lu().solve(&f) else { break };
        s -= step;
        if step.norm() <= 1e-15 * s.norm() {
            break;
        }
    }
    s
}

/// Rigid transform `R, t` minimising `sum |q_i - (R p_i + t)|^2`.
pub(crate) fn absolute_orientation(world: &[Point3<f64>], cam: &[Vector3<f64>]) -> Option<Pose> {
    let n = world.len() as f64;
    let cw = world.iter().map(|p| p.coords).sum::<Vector3<f64>>() / n;
    let cc = cam.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (p, q) in world.iter().zip(cam) {
        h += (q - cc) * (p.coords - cw).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u?, svd.v_t?);
    let mut d = Matrix3::identity();
    if (u * vt).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * vt;
    let t = cc - r * cw;
    Some(Pose::from_matrix(&r, t))
}

/// Up to four poses consistent with three 2D-3D correspondences.
pub fn p3p_solve(world: &[Point3<f64>; 3], pixels: &[Pixel; 3], k: &CameraIntrinsics) -> Vec<Pose> {
    let (p1, p2, p3) = (world[0].coords, world[1].coords, world[2].coords);
    let size = (p2 - p1).norm().max((p3 - p1).norm()).max((p3 - p2).norm());
    if size == 0.0 || (p2 - p1).cross(&(p3 - p1)).norm() <= DEGENERATE_EPS * size * size {
        return Vec::new();
    }
    let b: Vec<Vector3<f64>> = pixels.iter().map(|p| k.ray(p).normalize()).collect();
    let cos_a = b[1].dot(&b[2]);
    let cos_b = b[0].dot(&b[2]);
    let cos_g = b[0].dot(&b[1]);
    let a2 = (p2 - p3).norm_squared();
    let b2 = (p1 - p3).norm_squared();
    let c2 = (p1 - p2).norm_squared();

    let amc = (a2 - c2) / b2;
    let apc = (a2 + c2) / b2;
    let bmc = (b2 - c2) / b2;
    let bma = (b2 - a2) / b2;
    let coeffs = [
        (amc - 1.0).powi(2) - 4.0 * c2 / b2 * cos_a * cos_a,
        4.0 * (amc * (1.0 - amc) * cos_b - (1.0 - apc) * cos_a * cos_g + 2.0 * c2 / b2 * cos_a * cos_a * cos_b),
        2.0 * (amc * amc - 1.0 + 2.0 * amc * amc * cos_b * cos_b + 2.0 * bmc * cos_a * cos_a
            - 4.0 * apc * cos_a * cos_b * cos_g
            + 2.0 * bma * cos_g * cos_g),
        4.0 * (-amc * (1.0 + amc) * cos_b + 2.0 * a2 / b2 * cos_g * cos_g * cos_b - (1.0 - apc) * cos_a * cos_g),
        (1.0 + amc).powi(2) - 4.0 * a2 / b2 * cos_g * cos_g,
    ];

    let cos = [cos_a, cos_b, cos_g];
    let d2 = [a2, b2, c2];
    let mut poses: Vec<Pose> = Vec::new();
    for v in quartic_roots(coeffs) {
        if v <= 0.0 {
            continue;
        }
        let s1_sq = b2 / (1.0 + v * v - 2.0 * v * cos_b);
        if !(s1_sq > 0.0) {
            continue;
        }
        let s1 = s1_sq.sqrt();
        // u from the closed form; near its singularity, from the c-equation.
        let den = 2.0 * (cos_g - v * cos_a);
        let mut us = Vec::new();
        if den.abs() > 1e-10 {
            us.push(((-1.0 + amc) * v * v - 2.0 * amc * cos_b * v + 1.0 + amc) / den);
        } else {
            // u^2 - 2u cos_g + 1 - c2 / s1^2 = 0
            let disc = cos_g * cos_g - 1.0 + c2 / s1_sq;
            if disc >= 0.0 {
                us.push(cos_g + disc.sqrt());
                us.push(cos_g - disc.sqrt());
            }
        }
        for u in us {
            if u <= 0.0 {
                continue;
            }
            let s = polish(Vector3::new(s1, u * s1, v * s1), &cos, &d2);
            if s.iter().any(|x| !(*x > 0.0)) {
                continue;
            }
            let cam: Vec<Vector3<f64>> = (0..3).map(|i| b[i] * s[i]).collect();
            let Some(pose) = absolute_orientation(world, &cam) else { continue };
            let consistent = (0..3).all(|i| (pose.transform(&world[i]).coords - cam[i]).norm() <= 1e-6 * size);
            let duplicate = poses
                .iter()
                .any(|p| p.rotation_angle_to(&pose) < 1e-9 && p.translation_distance_to(&pose) < 1e-9 * size);
            if consistent && !duplicate {
                poses.push(pose);
            }
        }
    }
    poses
}
