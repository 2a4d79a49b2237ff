//! Sequence directory layout:
//!
//! ```text
//! sequence.cfg          key = value: fx fy cx cy width height fps frames
//! groundtruth.txt       TUM trajectory, world-from-camera
//! frames/000000.depth   per-frame rasters and keypoints
//! frames/000000.mask
//! frames/000000.kpts
//! ```

use std::path::{Path, PathBuf};

use super::kv::KeyValues;
use super::{
    read_depth, read_keypoints, read_mask, read_trajectory, DatasetError, DepthRaster,
    InstanceMaskRaster, KeypointRecord, Trajectory,
};
use crate::geometry::CameraIntrinsics;

pub const SEQUENCE_CFG: &str = "sequence.cfg";
pub const GROUNDTRUTH: &str = "groundtruth.txt";
pub const FRAMES_DIR: &str = "frames";

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceConfig {
    pub intrinsics: CameraIntrinsics,
    pub fps: f64,
    pub frame_count: usize,
}

impl SequenceConfig {
    pub fn timestamp(&self, index: usize) -> f64 {
        index as f64 / self.fps
    }

    pub fn to_kv(&self) -> KeyValues {
        let k = &self.intrinsics;
        let mut kv = KeyValues::new();
        kv.set("fx", k.fx);
        kv.set("fy", k.fy);
        kv.set("cx", k.cx);
        kv.set("cy", k.cy);
        kv.set("width", k.width);
        kv.set("height", k.height);
        kv.set("fps", self.fps);
        kv.set("frames", self.frame_count);
        kv
    }

    pub fn from_kv(kv: &KeyValues) -> Result<Self, String> {
        let intrinsics = CameraIntrinsics::new(
            kv.require("fx")?,
            kv.require("fy")?,
            kv.require("cx")?,
            kv.require("cy")?,
            kv.require("width")?,
            kv.require("height")?,
        )
        .map_err(|e| e.to_string())?;
        let fps: f64 = kv.require("fps")?;
        if !(fps.is_finite() && fps > 0.0) {
            return Err(format!("fps must be positive, got {fps}"));
        }
        Ok(Self {
            intrinsics,
            fps,
            frame_count: kv.require("frames")?,
        })
    }
}

pub fn frame_path(dir: &Path, index: usize, ext: &str) -> PathBuf {
    dir.join(FRAMES_DIR).join(format!("{index:06}.{ext}"))
}

/// The three virtual-sensor payloads of one frame plus its timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle {
    pub index: usize,
    pub timestamp: f64,
    pub keypoints: Vec<KeypointRecord>,
    pub depth: DepthRaster,
    pub mask: InstanceMaskRaster,
}

/// An opened sequence directory.
#[derive(Debug, Clone)]
pub struct SequenceDir {
    pub root: PathBuf,
    pub config: SequenceConfig,
}

impl SequenceDir {
    pub fn open(root: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let root = root.as_ref().to_path_buf();
        if !root.is_dir() {
            return Err(DatasetError::Data(format!(
                "sequence directory {} does not exist",
                root.display()
            )));
        }
        let cfg_path = root.join(SEQUENCE_CFG);
        let kv = KeyValues::read(&cfg_path)?;
        let config = SequenceConfig::from_kv(&kv)
            .map_err(|m| DatasetError::Data(format!("{}: {m}", cfg_path.display())))?;
        Ok(Self { root, config })
    }

    pub fn frame_count(&self) -> usize {
        self.config.frame_count
    }

    pub fn groundtruth(&self) -> Result<Trajectory, DatasetError> {
        read_trajectory(&self.root.join(GROUNDTRUTH))
    }

    pub fn frame(&self, index: usize) -> Result<FrameBundle, DatasetError> {
        load_frame_bundle(self, index)
    }
}

pub fn load_frame_bundle(seq: &SequenceDir, index: usize) -> Result<FrameBundle, DatasetError> {
    if index >= seq.config.frame_count {
        return Err(DatasetError::Data(format!(
            "frame index {index} beyond frame count {}",
            seq.config.frame_count
        )));
    }
    let k = &seq.config.intrinsics;
    let depth = read_depth(&frame_path(&seq.root, index, "depth"))?;
    let mask = read_mask(&frame_path(&seq.root, index, "mask"))?;
    let kpath = frame_path(&seq.root, index, "kpts");
    let keypoints = read_keypoints(&kpath)?;
    for (what, w, h) in [("depth", depth.width, depth.height), ("mask", mask.width, mask.height)] {
        if (w, h) != (k.width, k.height) {
            return Err(DatasetError::Data(format!(
                "frame {index}: {what} raster is {w}x{h}, sequence is {}x{}",
                k.width, k.height
            )));
        }
    }
    if let Some(i) = keypoints.iter().position(|r| !r.in_bounds(k.width, k.height)) {
        return Err(DatasetError::Data(format!(
            "{}: keypoint {i} outside the image",
            kpath.display()
        )));
    }
    Ok(FrameBundle {
        index,
        timestamp: seq.config.timestamp(index),
        keypoints,
        depth,
        mask,
    })
}
