//! Per-frame front end: feature budgeting, dynamic-object masking and metric
//! backprojection of the surviving keypoints.
//!
//! The pipeline is `select_features -> build_dynamic_mask -> dilate ->
//! filter_static -> associate_depth`. Features without a usable depth are kept
//! as 2D-only observations so the back end can still track against them.

mod mask;

use std::cmp::Ordering;

pub use mask::{build_dynamic_mask, dilate, disk_half_widths, erode, DynamicMask};

use crate::descriptor::Descriptor;
use crate::geometry::{backproject, CameraIntrinsics, Pixel, Point3};
use crate::io::{DepthRaster, KeypointRecord};
use crate::sensors::SensorFrame;

/// Depth interval accepted by the front end, in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthRange {
    pub d_min: f64,
    pub d_max: f64,
}

impl DepthRange {
    pub fn new(d_min: f64, d_max: f64) -> Result<Self, String> {
        if !(d_min > 0.0 && d_min < d_max) {
            return Err(format!("invalid depth range [{d_min}, {d_max}]"));
        }
        Ok(Self { d_min, d_max })
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.d_min && d <= self.d_max
    }
}

impl Default for DepthRange {
    fn default() -> Self {
        Self {
            d_min: 0.3,
            d_max: 7.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontendConfig {
    pub budget: usize,
    pub grid_x: usize,
    pub grid_y: usize,
    /// `None` selects the default of 10 px at 640x480, scaled by the image diagonal.
    pub dilation_radius_px: Option<u32>,
    pub depth_range: DepthRange,
    pub masking: bool,
    pub dynamic_classes: Vec<u16>,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            budget: 1000,
            grid_x: 8,
            grid_y: 8,
            dilation_radius_px: None,
            depth_range: DepthRange::default(),
            masking: true,
            dynamic_classes: vec![crate::simulator::PERSON_CLASS],
        }
    }
}

impl FrontendConfig {
    pub fn dilation_radius(&self, k: &CameraIntrinsics) -> u32 {
        self.dilation_radius_px
            .unwrap_or_else(|| default_dilation_radius(k.width, k.height))
    }
}

pub fn default_dilation_radius(width: usize, height: usize) -> u32 {
    let diag = ((width * width + height * height) as f64).sqrt();
    (10.0 * diag / 800.0).round() as u32
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub pixel: Pixel,
    pub descriptor: Descriptor,
    pub response: f32,
    pub octave: u8,
    /// Index of the keypoint in the sensor's list.
    pub source: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureSet {
    pub items: Vec<Feature>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Stronger first; ties by `v`, then `u`, then sensor order.
fn rank(a: &Feature, b: &Feature) -> Ordering {
    b.response
        .total_cmp(&a.response)
        .then(a.pixel.v.total_cmp(&b.pixel.v))
        .then(a.pixel.u.total_cmp(&b.pixel.u))
        .then(a.source.cmp(&b.source))
}

/// Grid-bucketed selection of at most `budget` keypoints.
pub fn select_features(
    candidates: &[KeypointRecord],
    budget: usize,
    grid: (usize, usize),
    width: usize,
    height: usize,
) -> FeatureSet {
    let (gx, gy) = (grid.0.max(1), grid.1.max(1));
    let cells = gx * gy;
    let quota = budget.div_ceil(cells);
    let mut buckets: Vec<Vec<Feature>> = vec![Vec::new(); cells];
    for (i, r) in candidates.iter().enumerate() {
        let cx = ((r.u as f64 * gx as f64 / width as f64).floor().max(0.0) as usize).min(gx - 1);
        let cy = ((r.v as f64 * gy as f64 / height as f64).floor().max(0.0) as usize).min(gy - 1);
        buckets[cy * gx + cx].push(Feature {
            pixel: r.pixel(),
            descriptor: r.descriptor,
            response: r.response,
            octave: r.octave,
            source: i,
        });
    }
    let mut kept: Vec<Feature> = Vec::new();
    for mut b in buckets {
        b.sort_by(rank);
        b.truncate(quota);
        kept.extend(b);
    }
    kept.sort_by(rank);
    kept.truncate(budget);
    FeatureSet { items: kept }
}

fn clamped_pixel(p: &Pixel, width: usize, height: usize) -> (usize, usize) {
    let x = (p.u.round().max(0.0) as usize).min(width - 1);
    let y = (p.v.round().max(0.0) as usize).min(height - 1);
    (x, y)
}

/// Keeps the features whose rounded pixel is unset in the dilated mask.
pub fn filter_static(fs: &FeatureSet, dilated: &DynamicMask) -> FeatureSet {
    FeatureSet {
        items: fs
            .items
            .iter()
            .filter(|f| {
                let (x, y) = clamped_pixel(&f.pixel, dilated.width, dilated.height);
                !dilated.get(x, y)
            })
            .copied()
            .collect(),
    }
}

/// A feature lifted to a metric camera-frame point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledFeature {
    pub point: Point3<f64>,
    pub descriptor: Descriptor,
    pub pixel: Pixel,
    pub depth: f64,
    pub octave: u8,
}

/// A feature without a usable depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonoFeature {
    pub pixel: Pixel,
    pub descriptor: Descriptor,
    pub octave: u8,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrontEndOutput {
    pub scaled: Vec<ScaledFeature>,
    pub mono_only: Vec<MonoFeature>,
}

impl FrontEndOutput {
    pub fn len(&self) -> usize {
        self.scaled.len() + self.mono_only.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scaled.is_empty() && self.mono_only.is_empty()
    }

    /// All observations as (pixel, descriptor, depth) with scaled ones first.
    pub fn observations(&self) -> impl Iterator<Item = (Pixel, Descriptor, Option<f64>)> + '_ {
        self.scaled
            .iter()
            .map(|s| (s.pixel, s.descriptor, Some(s.depth)))
            .chain(self.mono_only.iter().map(|m| (m.pixel, m.descriptor, None)))
    }
}

/// Nearest-pixel depth lookup and backprojection. Out-of-range or invalid
/// depths demote the feature to `mono_only` rather than being clamped.
pub fn associate_depth(
    fs: &FeatureSet,
    depth: &DepthRaster,
    range: &DepthRange,
    k: &CameraIntrinsics,
) -> FrontEndOutput {
    let mut out = FrontEndOutput::default();
    for f in &fs.items {
        let (x, y) = clamped_pixel(&f.pixel, depth.width, depth.height);
        let d = depth.valid_at(x, y).map(f64::from).filter(|d| range.contains(*d));
        match d.and_then(|d| backproject(f.pixel, d, k).ok().map(|p| (d, p))) {
            Some((d, point)) => out.scaled.push(ScaledFeature {
                point,
                descriptor: f.descriptor,
                pixel: f.pixel,
                depth: d,
                octave: f.octave,
            }),
            None => out.mono_only.push(MonoFeature {
                pixel: f.pixel,
                descriptor: f.descriptor,
                octave: f.octave,
            }),
        }
    }
    out
}

/// Full per-frame pipeline. With masking disabled the static filter is skipped.
pub fn process_frame(frame: &SensorFrame, cfg: &FrontendConfig, k: &CameraIntrinsics) -> FrontEndOutput {
    let selected = select_features(
        &frame.keypoints,
        cfg.budget,
        (cfg.grid_x, cfg.grid_y),
        k.width,
        k.height,
    );
    let kept = if cfg.masking {
        let dynamic = build_dynamic_mask(&frame.masks, &cfg.dynamic_classes);
        let dilated = dilate(&dynamic, cfg.dilation_radius(k));
        filter_static(&selected, &dilated)
    } else {
        selected
    };
    associate_depth(&kept, &frame.depth, &cfg.depth_range, k)
}
