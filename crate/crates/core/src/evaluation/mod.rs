//! Trajectory and depth evaluation: alignment, ATE, per-frame depth metrics,
//! temporal consistency, depth scaling strategies and drift analysis.

mod align;
mod depth;
mod drift;

use std::fmt::Write as _;

use thiserror::Error;

pub use align::{associate, ate_rmse, umeyama_align, AlignMode, AlignmentResult, AteResult, DEFAULT_MAX_DT};
pub use depth::{
    apply_scaling_strategy, consistency_report, cv, depth_frame_metrics, oracle_scale, ConsistencyReport, DepthFrameMetrics,
    DepthMap, MetricSeries, ScalingStrategy, CLIP_D_MIN,
};
pub use drift::{ar1_sum_variance, drift_variance_mc, loglog_slope, DriftConfig, DriftCurve, DriftModel};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("{0}")]
    Data(String),
    #[error("coefficient of variation is undefined for zero mean")]
    UndefinedCv,
    #[error("{0}")]
    Config(String),
}

fn num(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), |v| v.to_string())
}

/// `sequence,mode,rmse,median,max,pairs`
pub fn ate_csv<'a>(rows: impl IntoIterator<Item = (&'a str, &'a AteResult)>) -> String {
    let mut s = String::from("sequence,mode,rmse,median,max,pairs\n");
    for (name, r) in rows {
        let _ = writeln!(s, "{name},{},{},{},{},{}", r.alignment.mode, r.rmse, r.median, r.max, r.pairs);
    }
    s
}

/// `metric,mean,sigma,cv`
pub fn consistency_csv(report: &ConsistencyReport) -> String {
    let mut s = String::from("metric,mean,sigma,cv\n");
    for m in &report.metrics {
        let _ = writeln!(s, "{},{},{},{}", m.name, m.mean, m.sigma, num(m.cv));
    }
    s
}

/// `N,std,slope`, one row per step count.
pub fn drift_csv(curve: &DriftCurve) -> String {
    let mut s = String::from("N,std,slope\n");
    let slope = num(curve.slope);
    for (i, sd) in curve.std.iter().enumerate() {
        let _ = writeln!(s, "{},{sd},{slope}", i + 1);
    }
    s
}
