use rand::Rng;
use rand_distr::StandardNormal;

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftModel {
    Iid,
    /// Stationary AR(1) with correlation `phi` between consecutive errors.
    Ar1 { phi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftConfig {
    pub frames: usize,
    pub trials: usize,
    pub model: DriftModel,
    /// Marginal standard deviation of each per-step error.
    pub step_sigma: f64,
}

impl DriftConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.frames < 2 {
            return Err(EvalError::Config(format!("frames must be >= 2, got {}", self.frames)));
        }
        if self.trials < 1 {
            return Err(EvalError::Config("trials must be >= 1".into()));
        }
        if let DriftModel::Ar1 { phi } = self.model {
            if !(0.0..=1.0).contains(&phi) {
                return Err(EvalError::Config(format!("phi must lie in [0, 1], got {phi}")));
            }
        }
        if !(self.step_sigma >= 0.0 && self.step_sigma.is_finite()) {
            return Err(EvalError::Config(format!("invalid step sigma {}", self.step_sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftCurve {
    /// `std[i]` is the spread of the cumulative error after `i + 1` steps.
    pub std: Vec<f64>,
    /// Log-log slope over the second half of the curve; `None` when the
    /// curve has zeros.
    pub slope: Option<f64>,
}

/// Closed-form variance of the sum of `n` stationary AR(1) errors.
pub fn ar1_sum_variance(phi: f64, sigma: f64, n: usize) -> f64 {
    let mut cov = 0.0;
    for lag in 1..n {
        cov += (n - lag) as f64 * phi.powi(lag as i32);
    }
    sigma * sigma * (n as f64 + 2.0 * cov)
}

/// Least-squares slope of `log std` against `log n` for `n` in the upper half.
pub fn loglog_slope(std: &[f64]) -> Option<f64> {
    let start = std.len() / 2;
    let pts: Vec<(f64, f64)> = (start..std.len()).map(|i| (((i + 1) as f64).ln(), std[i])).collect();
    if pts.len() < 2 || pts.iter().any(|&(_, s)| !(s > 0.0)) {
        return None;
    }
    let pts: Vec<(f64, f64)> = pts.into_iter().map(|(x, s)| (x, s.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Monte-Carlo growth of the cumulative error spread.
pub fn drift_variance_mc<R: Rng + ?Sized>(cfg: &DriftConfig, rng: &mut R) -> Result<DriftCurve, EvalError> {
    cfg.validate()?;
    let n = cfg.frames;
    let phi = match cfg.model {
        DriftModel::Iid => 0.0,
        DriftModel::Ar1 { phi } => phi,
    };
    let innov = (1.0 - phi * phi).max(0.0).sqrt();
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    for _ in 0..cfg.trials {
        let mut e = 0.0;
        let mut acc = 0.0;
        for i in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            e = if i == 0 { z } else { phi * e + innov * z };
            acc += cfg.step_sigma * e;
            sum[i] += acc;
            sum_sq[i] += acc * acc;
        }
    }
    let t = cfg.trials as f64;
    let std: Vec<f64> = sum
        .iter()
        .zip(&sum_sq)
        .map(|(s, q)| {
            let m = s / t;
            (q / t - m * m).max(0.0).sqrt()
        })
        .collect();
    Ok(DriftCurve {
        slope: loglog_slope(&std),
        std,
    })
}
