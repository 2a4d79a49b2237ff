use std::path::PathBuf;

use mdslam::evaluation::{self, AlignMode, DriftConfig, DriftModel, DEFAULT_MAX_DT};
use mdslam::io::read_trajectory;
use mdslam::simulator::{build_scene, export_sequence, SceneConfig};
use nalgebra::Vector3;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mode(name: &str) -> PyResult<AlignMode> {
    name.parse().map_err(value_err)
}

/// Runs the command-line interface with `args` (without the program name)
/// and returns its exit code.
#[pyfunction]
fn cli(args: Vec<String>) -> i32 {
    mdslam::cli::run(std::iter::once("mdslam".to_string()).chain(args))
}

/// Renders the default scene into `out_dir`; returns the frame count.
#[pyfunction]
#[pyo3(signature = (out_dir, seed=0, duration=None))]
fn simulate(out_dir: PathBuf, seed: u64, duration: Option<f64>) -> PyResult<usize> {
    let mut cfg = SceneConfig::default();
    if let Some(d) = duration {
        cfg.trajectory.duration = d;
    }
    let scene = build_scene(&cfg, seed).map_err(value_err)?;
    let seq = export_sequence(&scene, &cfg.trajectory, &cfg.intrinsics, &out_dir).map_err(value_err)?;
    Ok(seq.frame_count)
}

/// ATE between two TUM trajectory files: `(rmse, median, max, pairs)`.
#[pyfunction]
#[pyo3(signature = (est, gt, align="se3", max_dt=DEFAULT_MAX_DT))]
fn ate_rmse(est: PathBuf, gt: PathBuf, align: &str, max_dt: f64) -> PyResult<(f64, f64, f64, usize)> {
    let est = read_trajectory(&est).map_err(value_err)?;
    let gt = read_trajectory(&gt).map_err(value_err)?;
    let r = evaluation::ate_rmse(&est, &gt, mode(align)?, max_dt).map_err(value_err)?;
    Ok((r.rmse, r.median, r.max, r.pairs))
}

/// Aligns `est` onto `gt`: `(rotation rows, translation, scale)`.
#[pyfunction]
#[pyo3(signature = (est, gt, align="sim3"))]
fn umeyama(est: Vec<[f64; 3]>, gt: Vec<[f64; 3]>, align: &str) -> PyResult<([[f64; 3]; 3], [f64; 3], f64)> {
    let e: Vec<Vector3<f64>> = est.into_iter().map(Vector3::from).collect();
    let g: Vec<Vector3<f64>> = gt.into_iter().map(Vector3::from).collect();
    let a = evaluation::umeyama_align(&e, &g, mode(align)?).map_err(value_err)?;
    let r = a.rotation;
    let rows = [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]);
    Ok((rows, a.translation.into(), a.scale))
}

/// Population coefficient of variation.
#[pyfunction]
fn cv(values: Vec<f64>) -> PyResult<f64> {
    evaluation::cv(&values).map_err(value_err)
}

/// Monte-Carlo drift curve: `(std per step count, log-log slope or None)`.
#[pyfunction]
#[pyo3(signature = (frames=1024, trials=10_000, phi=None, sigma=0.01, seed=0))]
fn drift(frames: usize, trials: usize, phi: Option<f64>, sigma: f64, seed: u64) -> PyResult<(Vec<f64>, Option<f64>)> {
    let cfg = DriftConfig {
        frames,
        trials,
        model: phi.map_or(DriftModel::Iid, |phi| DriftModel::Ar1 { phi }),
        step_sigma: sigma,
    };
    let c = evaluation::drift_variance_mc(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(value_err)?;
    Ok((c.std, c.slope))
}

#[pymodule]
fn mdslam_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(ate_rmse, m)?)?;
    m.add_function(wrap_pyfunction!(umeyama, m)?)?;
    m.add_function(wrap_pyfunction!(cv, m)?)?;
    m.add_function(wrap_pyfunction!(drift, m)?)?;
    Ok(())
}
