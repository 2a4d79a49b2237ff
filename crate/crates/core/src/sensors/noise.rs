use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SensorError;
use crate::descriptor::DESCRIPTOR_BITS;
use crate::frontend::{dilate, erode, DynamicMask};
use crate::io::{DepthRaster, InstanceMaskRaster, KeypointRecord};

/// Generative model of monocular depth error.
///
/// The per-frame global scale `s_t` is lognormal with `log s_t` an AR(1)
/// process whose stationary coefficient of variation is `scale_cv`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DepthNoiseModel {
    pub scale_cv: f64,
    pub ar1_phi: f64,
    /// Metres.
    pub additive_sigma: f64,
    pub rel_sigma: f64,
    pub dropout_rate: f64,
    /// Per-metre multiplicative bias growth.
    pub distance_bias_gain: f64,
}

impl DepthNoiseModel {
    pub fn validate(&self) -> Result<(), SensorError> {
        let bad = |m: &str| Err(SensorError::Model(m.to_string()));
        if !(self.scale_cv >= 0.0 && self.scale_cv.is_finite()) {
            return bad("scale_cv must be >= 0");
        }
        if !(0.0..=1.0).contains(&self.ar1_phi) {
            return bad("ar1_phi must lie in [0, 1]");
        }
        if !(self.additive_sigma >= 0.0 && self.rel_sigma >= 0.0) {
            return bad("noise sigmas must be >= 0");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if !self.distance_bias_gain.is_finite() {
            return bad("distance_bias_gain must be finite");
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }

    /// Variance of `log s_t`.
    pub fn log_scale_variance(&self) -> f64 {
        (1.0 + self.scale_cv * self.scale_cv).ln()
    }
}

/// AR(1) latent carried between frames.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DepthNoiseState {
    latent: Option<f64>,
    /// Scale factor applied to the most recent frame.
    pub last_scale: f64,
}

impl DepthNoiseState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Advances the latent and returns `s_t`, normalised so that `E[s_t] = 1`.
    pub fn step<R: Rng + ?Sized>(&mut self, m: &DepthNoiseModel, rng: &mut R) -> f64 {
        let var = m.log_scale_variance();
        let z: f64 = StandardNormal.sample(rng);
        let x = match self.latent {
            None => var.sqrt() * z,
            Some(prev) => m.ar1_phi * prev + ((1.0 - m.ar1_phi * m.ar1_phi) * var).sqrt() * z,
        };
        self.latent = Some(x);
        self.last_scale = (x - var / 2.0).exp();
        self.last_scale
    }
}

/// Applies one frame of depth noise. Invalid input pixels stay invalid;
/// outputs that land at or below zero are treated as dropouts.
pub fn perturb_depth<R: Rng + ?Sized>(
    gt: &DepthRaster,
    m: &DepthNoiseModel,
    state: &mut DepthNoiseState,
    rng: &mut R,
) -> DepthRaster {
    if m.is_zero() {
        state.last_scale = 1.0;
        return gt.clone();
    }
    let s = state.step(m, rng);
    let noisy = m.additive_sigma > 0.0 || m.rel_sigma > 0.0;
    let mut out = gt.clone();
    for d in out.values.iter_mut() {
        if !DepthRaster::is_valid(*d) {
            *d = 0.0;
            continue;
        }
        let g = *d as f64;
        let mut v = s * g * (1.0 + m.distance_bias_gain * g);
        if noisy {
            let z: f64 = StandardNormal.sample(rng);
            v += (m.additive_sigma + m.rel_sigma * g) * z;
        }
        if m.dropout_rate > 0.0 && rng.random::<f64>() < m.dropout_rate {
            v = 0.0;
        }
        *d = if v > 0.0 { v as f32 } else { 0.0 };
    }
    out
}

/// Median of `pred / gt` over pixels valid in both rasters.
pub fn frame_scale(pred: &DepthRaster, gt: &DepthRaster) -> Option<f64> {
    let mut r: Vec<f64> = pred
        .values
        .iter()
        .zip(&gt.values)
        .filter(|(p, g)| DepthRaster::is_valid(**p) && DepthRaster::is_valid(**g))
        .map(|(p, g)| *p as f64 / *g as f64)
        .collect();
    if r.is_empty() {
        return None;
    }
    r.sort_by(f64::total_cmp);
    let n = r.len();
    Some(if n % 2 == 1 { r[n / 2] } else { 0.5 * (r[n / 2 - 1] + r[n / 2]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DescriptorNoiseModel {
    pub flip_prob: f64,
}

impl DescriptorNoiseModel {
    pub fn validate(&self) -> Result<(), SensorError> {
        if !(0.0..0.5).contains(&self.flip_prob) {
            return Err(SensorError::Model(format!(
                "flip_prob must lie in [0, 0.5), got {}",
                self.flip_prob
            )));
        }
        Ok(())
    }
}

/// Flips every descriptor bit independently with `flip_prob`.
pub fn perturb_descriptors<R: Rng + ?Sized>(
    records: &[KeypointRecord],
    m: &DescriptorNoiseModel,
    rng: &mut R,
) -> Vec<KeypointRecord> {
    let mut out = records.to_vec();
    if m.flip_prob == 0.0 {
        return out;
    }
    for r in out.iter_mut() {
        for bit in 0..DESCRIPTOR_BITS as usize {
            if rng.random::<f64>() < m.flip_prob {
                r.descriptor.flip(bit);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MaskNoiseModel {
    /// Negative erodes, positive dilates each instance.
    pub boundary_jitter_px: i32,
    pub miss_rate: f64,
}

impl MaskNoiseModel {
    pub fn validate(&self) -> Result<(), SensorError> {
        if !(0.0..=1.0).contains(&self.miss_rate) {
            return Err(SensorError::Model(format!(
                "miss_rate must lie in [0, 1], got {}",
                self.miss_rate
            )));
        }
        Ok(())
    }
}

/// Drops whole instances with `miss_rate` and morphs the survivors by
/// `|boundary_jitter_px|`. Dilated pixels only claim background, so
/// instances never overwrite each other.
pub fn perturb_masks<R: Rng + ?Sized>(
    gt: &InstanceMaskRaster,
    m: &MaskNoiseModel,
    rng: &mut R,
) -> InstanceMaskRaster {
    if *m == MaskNoiseModel::default() {
        return gt.clone();
    }
    let (w, h) = (gt.width, gt.height);
    let mut out = InstanceMaskRaster::empty(w, h);
    let mut survivors = Vec::new();
    for inst in &gt.instances {
        let missed = m.miss_rate > 0.0 && rng.random::<f64>() < m.miss_rate;
        if !missed {
            survivors.push(*inst);
        }
    }
    let radius = m.boundary_jitter_px.unsigned_abs();
    for inst in &survivors {
        let mut own = DynamicMask::new(w, h);
        for (i, &id) in gt.ids.iter().enumerate() {
            if id == inst.id {
                own.set(i % w, i / w, true);
            }
        }
        let morphed = match m.boundary_jitter_px {
            j if j < 0 => erode(&own, radius),
            j if j > 0 => dilate(&own, radius),
            _ => own,
        };
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if morphed.get(x, y) && out.ids[i] == 0 && (gt.ids[i] == 0 || gt.ids[i] == inst.id) {
                    out.ids[i] = inst.id;
                }
            }
        }
    }
    out.instances = survivors;
    out
}
