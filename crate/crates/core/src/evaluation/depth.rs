use std::fmt;
use std::str::FromStr;

use super::EvalError;
use crate::io::DepthRaster;

/// Depth raster held in double precision for evaluation. Values that are
/// not finite and positive are invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

fn valid(d: f64) -> bool {
    d.is_finite() && d > 0.0
}

impl DepthMap {
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "depth map size mismatch");
        Self { width, height, values }
    }

    /// Rounds to single precision; invalid values become 0.
    pub fn to_raster(&self) -> DepthRaster {
        let v = self.values.iter().map(|&d| if valid(d) { d as f32 } else { 0.0 }).collect();
        DepthRaster::from_values(self.width, self.height, v)
    }
}

impl From<&DepthRaster> for DepthMap {
    fn from(r: &DepthRaster) -> Self {
        Self {
            width: r.width,
            height: r.height,
            values: r.values.iter().map(|&d| d as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthFrameMetrics {
    pub rmse: f64,
    pub mae: f64,
    pub absrel: f64,
    /// Median of gt / pred.
    pub scale: f64,
    pub valid_count: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    let n = v.len();
    let (lower, mid, _) = v.select_nth_unstable_by(n / 2, f64::total_cmp);
    let mid = *mid;
    if n % 2 == 1 {
        mid
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + mid)
    }
}

fn joint(pred: &DepthMap, gt: &DepthMap) -> Result<Vec<(f64, f64)>, EvalError> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(EvalError::Data(format!(
            "prediction is {}x{}, ground truth {}x{}",
            pred.width, pred.height, gt.width, gt.height
        )));
    }
    let pairs: Vec<(f64, f64)> = pred
        .values
        .iter()
        .zip(&gt.values)
        .filter(|(p, g)| valid(**p) && valid(**g))
        .map(|(p, g)| (*p, *g))
        .collect();
    if pairs.is_empty() {
        return Err(EvalError::Data("no pixel is valid in both rasters".into()));
    }
    Ok(pairs)
}

/// Median of gt / pred over jointly valid pixels.
pub fn oracle_scale(pred: &DepthMap, gt: &DepthMap) -> Result<f64, EvalError> {
    Ok(median(joint(pred, gt)?.into_iter().map(|(p, g)| g / p).collect()))
}

pub fn depth_frame_metrics(pred: &DepthMap, gt: &DepthMap) -> Result<DepthFrameMetrics, EvalError> {
    let pairs = joint(pred, gt)?;
    let n = pairs.len() as f64;
    let (mut se, mut ae, mut rel) = (0.0, 0.0, 0.0);
    for &(p, g) in &pairs {
        se += (p - g) * (p - g);
        ae += (p - g).abs();
        rel += (p - g).abs() / g;
    }
    Ok(DepthFrameMetrics {
        rmse: (se / n).sqrt(),
        mae: ae / n,
        absrel: rel / n,
        scale: median(pairs.iter().map(|(p, g)| g / p).collect()),
        valid_count: pairs.len(),
    })
}

/// Population standard deviation over mean.
pub fn cv(series: &[f64]) -> Result<f64, EvalError> {
    let (mean, sigma) = mean_sigma(series)?;
    if mean == 0.0 {
        return Err(EvalError::UndefinedCv);
    }
    Ok(sigma / mean.abs())
}

fn mean_sigma(series: &[f64]) -> Result<(f64, f64), EvalError> {
    if series.len() < 2 {
        return Err(EvalError::Data(format!("need at least 2 values, got {}", series.len())));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub name: &'static str,
    pub values: Vec<f64>,
    pub mean: f64,
    pub sigma: f64,
    /// `None` when the mean is zero.
    pub cv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub metrics: Vec<MetricSeries>,
}

impl ConsistencyReport {
    pub fn get(&self, name: &str) -> Option<&MetricSeries> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// Per-metric mean, sigma and CV over a sequence of frames.
pub fn consistency_report(frames: &[DepthFrameMetrics]) -> Result<ConsistencyReport, EvalError> {
    let columns: [(&'static str, fn(&DepthFrameMetrics) -> f64); 4] = [
        ("rmse", |m| m.rmse),
        ("mae", |m| m.mae),
        ("absrel", |m| m.absrel),
        ("scale", |m| m.scale),
    ];
    let mut metrics = Vec::new();
    for (name, f) in columns {
        let values: Vec<f64> = frames.iter().map(f).collect();
        let (mean, sigma) = mean_sigma(&values)?;
        metrics.push(MetricSeries {
            name,
            cv: (mean != 0.0).then(|| sigma / mean.abs()),
            values,
            mean,
            sigma,
        });
    }
    Ok(ConsistencyReport { metrics })
}

/// Fixed lower bound used by the clipping strategy.
pub const CLIP_D_MIN: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalingStrategy {
    Raw,
    /// Each frame multiplied by its own median(gt / pred).
    PerFrame,
    /// One median(gt / pred) over the first 10% of frames, applied to all.
    Global,
    /// Values outside `[CLIP_D_MIN, d_max]` become invalid.
    Clip { d_max: f64 },
}

impl FromStr for ScalingStrategy {
    type Err = String;

    /// `raw`, `per-frame`, `global` or `clip:<d_max>`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "raw" => Ok(Self::Raw),
            "per-frame" => Ok(Self::PerFrame),
            "global" => Ok(Self::Global),
            _ => {
                let d = s
                    .strip_prefix("clip:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| format!("unknown scaling strategy `{s}`"))?;
                if !(d > CLIP_D_MIN && d.is_finite()) {
                    return Err(format!("clip d_max must exceed {CLIP_D_MIN}, got {d}"));
                }
                Ok(Self::Clip { d_max: d })
            }
        }
    }
}

impl fmt::Display for ScalingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Raw => f.write_str("raw"),
            Self::PerFrame => f.write_str("per-frame"),
            Self::Global => f.write_str("global"),
            Self::Clip { d_max } => write!(f, "clip:{d_max}"),
        }
    }
}

fn scaled(m: &DepthMap, s: f64) -> DepthMap {
    DepthMap {
        width: m.width,
        height: m.height,
        values: m.values.iter().map(|&d| if valid(d) { d * s } else { d }).collect(),
    }
}

pub fn apply_scaling_strategy(pred: &[DepthMap], gt: &[DepthMap], strategy: ScalingStrategy) -> Result<Vec<DepthMap>, EvalError> {
    match strategy {
        ScalingStrategy::Raw => Ok(pred.to_vec()),
        ScalingStrategy::Clip { d_max } => Ok(pred
            .iter()
            .map(|m| DepthMap {
                width: m.width,
                height: m.height,
                values: m
                    .values
                    .iter()
                    .map(|&d| if valid(d) && (CLIP_D_MIN..=d_max).contains(&d) { d } else { 0.0 })
                    .collect(),
            })
            .collect()),
        ScalingStrategy::PerFrame | ScalingStrategy::Global => {
            if pred.len() != gt.len() {
                return Err(EvalError::Data(format!("{} predicted frames vs {} ground-truth frames", pred.len(), gt.len())));
            }
            if pred.is_empty() {
                return Ok(Vec::new());
            }
            if strategy == ScalingStrategy::PerFrame {
                return pred.iter().zip(gt).map(|(p, g)| Ok(scaled(p, oracle_scale(p, g)?))).collect();
            }
            let window = pred.len().div_ceil(10);
            let mut ratios = Vec::new();
            for (p, g) in pred.iter().zip(gt).take(window) {
                ratios.extend(joint(p, g)?.into_iter().map(|(p, g)| g / p));
            }
            let s = median(ratios);
            Ok(pred.iter().map(|p| scaled(p, s)).collect())
        }
    }
}
