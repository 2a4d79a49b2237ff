//! Virtual sensors: per-frame keypoints, metric depth and instance masks,
//! read from a sequence directory or rendered from a scene, optionally
//! corrupted by seeded noise models.

mod noise;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use noise::{
    frame_scale, perturb_depth, perturb_descriptors, perturb_masks, DepthNoiseModel, DepthNoiseState,
    DescriptorNoiseModel, MaskNoiseModel,
};

use crate::geometry::CameraIntrinsics;
use crate::io::{DatasetError, DepthRaster, InstanceMaskRaster, KeypointRecord, SequenceDir, Trajectory};
use crate::simulator::{camera_pose_at, render_frame, Scene, SimError, TrajectorySpec};

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("end of sequence")]
    EndOfSequence,
    #[error("invalid noise model: {0}")]
    Model(String),
    #[error("sensor frame: {0}")]
    Frame(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// 8-bit grayscale image carried for visualisation only.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub index: usize,
    pub timestamp: f64,
    pub keypoints: Vec<KeypointRecord>,
    pub depth: DepthRaster,
    pub masks: InstanceMaskRaster,
    pub image: Option<GrayImage>,
}

impl SensorFrame {
    pub fn width(&self) -> usize {
        self.depth.width
    }

    pub fn height(&self) -> usize {
        self.depth.height
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let (w, h) = (self.depth.width, self.depth.height);
        if (self.masks.width, self.masks.height) != (w, h) {
            return Err(SensorError::Frame(format!(
                "mask is {}x{}, depth is {w}x{h}",
                self.masks.width, self.masks.height
            )));
        }
        if let Some(img) = &self.image {
            if (img.width, img.height) != (w, h) {
                return Err(SensorError::Frame("image size differs from depth".into()));
            }
        }
        if let Some(i) = self.keypoints.iter().position(|k| !k.in_bounds(w, h)) {
            return Err(SensorError::Frame(format!("keypoint {i} out of bounds")));
        }
        Ok(())
    }
}

/// Sequential frame provider.
pub trait SensorStream {
    fn intrinsics(&self) -> CameraIntrinsics;

    fn frame_count(&self) -> usize;

    /// Returns the next frame, or `SensorError::EndOfSequence` once exhausted.
    fn next_frame(&mut self) -> Result<SensorFrame, SensorError>;
}

impl<S: SensorStream + ?Sized> SensorStream for Box<S> {
    fn intrinsics(&self) -> CameraIntrinsics {
        (**self).intrinsics()
    }

    fn frame_count(&self) -> usize {
        (**self).frame_count()
    }

    fn next_frame(&mut self) -> Result<SensorFrame, SensorError> {
        (**self).next_frame()
    }
}

/// Reads frames from a sequence directory.
pub struct FileBackedSensors {
    seq: SequenceDir,
    cursor: usize,
}

impl FileBackedSensors {
    pub fn new(seq: SequenceDir) -> Self {
        Self { seq, cursor: 0 }
    }

    pub fn open(root: impl AsRef<std::path::Path>) -> Result<Self, SensorError> {
        Ok(Self::new(SequenceDir::open(root)?))
    }

    pub fn sequence(&self) -> &SequenceDir {
        &self.seq
    }
}

impl SensorStream for FileBackedSensors {
    fn intrinsics(&self) -> CameraIntrinsics {
        self.seq.config.intrinsics
    }

    fn frame_count(&self) -> usize {
        self.seq.frame_count()
    }

    fn next_frame(&mut self) -> Result<SensorFrame, SensorError> {
        if self.cursor >= self.seq.frame_count() {
            return Err(SensorError::EndOfSequence);
        }
        let index = self.cursor;
        self.cursor += 1;
        let b = self.seq.frame(index)?;
        Ok(SensorFrame {
            index,
            timestamp: b.timestamp,
            keypoints: b.keypoints,
            depth: b.depth,
            masks: b.mask,
            image: None,
        })
    }
}

/// Renders ground-truth frames on demand.
pub struct SyntheticSensors {
    scene: Scene,
    spec: TrajectorySpec,
    k: CameraIntrinsics,
    cursor: usize,
}

impl SyntheticSensors {
    pub fn new(scene: Scene, spec: TrajectorySpec, k: CameraIntrinsics) -> Result<Self, SensorError> {
        spec.validate()?;
        Ok(Self {
            scene,
            spec,
            k,
            cursor: 0,
        })
    }

    fn timestamp(&self, i: usize) -> f64 {
        i as f64 / self.spec.fps
    }

    /// World-from-camera ground truth for every frame.
    pub fn ground_truth(&self) -> Result<Trajectory, SensorError> {
        let mut gt = Trajectory::new();
        for i in 0..self.spec.frame_count() {
            let t = self.timestamp(i);
            gt.push(t, camera_pose_at(&self.spec, t.min(self.spec.duration))?.inverse());
        }
        Ok(gt)
    }
}

impl SensorStream for SyntheticSensors {
    fn intrinsics(&self) -> CameraIntrinsics {
        self.k
    }

    fn frame_count(&self) -> usize {
        self.spec.frame_count()
    }

    fn next_frame(&mut self) -> Result<SensorFrame, SensorError> {
        if self.cursor >= self.spec.frame_count() {
            return Err(SensorError::EndOfSequence);
        }
        let index = self.cursor;
        let t = self.timestamp(index);
        let pose = camera_pose_at(&self.spec, t.min(self.spec.duration))?;
        let f = render_frame(&self.scene, &pose, &self.k, t)?;
        self.cursor += 1;
        Ok(SensorFrame {
            index,
            timestamp: t,
            keypoints: f.keypoint_records(),
            depth: f.depth,
            masks: f.mask,
            image: None,
        })
    }
}

/// Replays frames held in memory, e.g. a pre-rendered sequence shared by
/// several noisy runs.
pub struct MemorySensors {
    frames: std::sync::Arc<Vec<SensorFrame>>,
    k: CameraIntrinsics,
    cursor: usize,
}

impl MemorySensors {
    pub fn new(frames: std::sync::Arc<Vec<SensorFrame>>, k: CameraIntrinsics) -> Self {
        Self { frames, k, cursor: 0 }
    }

    /// Drains `stream` into memory.
    pub fn record<S: SensorStream>(stream: &mut S) -> Result<Vec<SensorFrame>, SensorError> {
        let mut out = Vec::with_capacity(stream.frame_count());
        loop {
            match stream.next_frame() {
                Ok(f) => out.push(f),
                Err(SensorError::EndOfSequence) => return Ok(out),
                Err(e) => return Err(e),
            }
        }
    }
}

impl SensorStream for MemorySensors {
    fn intrinsics(&self) -> CameraIntrinsics {
        self.k
    }

    fn frame_count(&self) -> usize {
        self.frames.len()
    }

    fn next_frame(&mut self) -> Result<SensorFrame, SensorError> {
        let f = self.frames.get(self.cursor).ok_or(SensorError::EndOfSequence)?;
        self.cursor += 1;
        Ok(f.clone())
    }
}

/// Noise applied on top of another stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorNoise {
    pub depth: DepthNoiseModel,
    pub descriptor: DescriptorNoiseModel,
    pub mask: MaskNoiseModel,
    /// Multiplies the first frame's depth only, to mis-scale map initialisation.
    pub init_depth_scale: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            depth: DepthNoiseModel::default(),
            descriptor: DescriptorNoiseModel::default(),
            mask: MaskNoiseModel::default(),
            init_depth_scale: 1.0,
        }
    }
}

impl SensorNoise {
    pub fn validate(&self) -> Result<(), SensorError> {
        self.depth.validate()?;
        self.descriptor.validate()?;
        self.mask.validate()?;
        if !(self.init_depth_scale > 0.0 && self.init_depth_scale.is_finite()) {
            return Err(SensorError::Model("init_depth_scale must be positive".into()));
        }
        Ok(())
    }
}

/// Seeded noise wrapper; identical seeds give bitwise-identical streams.
pub struct NoisySensors<S> {
    inner: S,
    noise: SensorNoise,
    depth_state: DepthNoiseState,
    rng: ChaCha8Rng,
    produced: usize,
    scales: Vec<f64>,
}

impl<S: SensorStream> NoisySensors<S> {
    pub fn new(inner: S, noise: SensorNoise, seed: u64) -> Result<Self, SensorError> {
        noise.validate()?;
        Ok(Self {
            inner,
            noise,
            depth_state: DepthNoiseState::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            produced: 0,
            scales: Vec::new(),
        })
    }

    /// Global depth scale factor applied to each frame produced so far.
    pub fn applied_scales(&self) -> &[f64] {
        &self.scales
    }
}

impl<S: SensorStream> SensorStream for NoisySensors<S> {
    fn intrinsics(&self) -> CameraIntrinsics {
        self.inner.intrinsics()
    }

    fn frame_count(&self) -> usize {
        self.inner.frame_count()
    }

    fn next_frame(&mut self) -> Result<SensorFrame, SensorError> {
        let mut f = self.inner.next_frame()?;
        let n = &self.noise;
        f.masks = perturb_masks(&f.masks, &n.mask, &mut self.rng);
        f.keypoints = perturb_descriptors(&f.keypoints, &n.descriptor, &mut self.rng);
        f.depth = perturb_depth(&f.depth, &n.depth, &mut self.depth_state, &mut self.rng);
        let mut scale = self.depth_state.last_scale;
        if self.produced == 0 && n.init_depth_scale != 1.0 {
            for d in f.depth.values.iter_mut() {
                *d = (*d as f64 * n.init_depth_scale) as f32;
            }
            scale *= n.init_depth_scale;
        }
        self.scales.push(scale);
        self.produced += 1;
        Ok(f)
    }
}
