//! On-disk formats shared by the simulator, the virtual sensors and the CLI.
//!
//! Binary formats are little-endian with a four-byte ASCII magic:
//!
//! | file     | magic  | layout                                                         |
//! |----------|--------|----------------------------------------------------------------|
//! | `.depth` | `DPD1` | `u32 w, u32 h, w*h f32` metres, `0.0` = invalid                |
//! | `.mask`  | `MSK1` | `u32 w, u32 h, u16 n, n*(u16 id, u16 class), w*h u16` ids      |
//! | `.kpts`  | `KPT1` | `u32 n, n*(f32 u, f32 v, f32 response, u8 octave, 32B desc)`   |
//!
//! Trajectories are TUM text files (`timestamp tx ty tz qx qy qz qw`).

mod keypoints;
pub mod kv;
mod raster;
mod sequence;
mod trajectory;

use std::path::Path;

use thiserror::Error;

pub use keypoints::{decode_keypoints, encode_keypoints, read_keypoints, write_keypoints, KeypointRecord};
pub use raster::{
    decode_depth, decode_mask, encode_depth, encode_mask, read_depth, read_mask, write_depth,
    write_mask, DepthRaster, InstanceInfo, InstanceMaskRaster,
};
pub use sequence::{
    frame_path, load_frame_bundle, FrameBundle, SequenceConfig, SequenceDir, FRAMES_DIR, GROUNDTRUTH,
    SEQUENCE_CFG,
};
pub use trajectory::{
    parse_trajectory, read_trajectory, write_trajectory, StampedPose, Trajectory,
};

/// Decoding failure located at a byte offset in the payload.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at byte {offset}: {msg}")]
pub struct FormatError {
    pub offset: usize,
    pub msg: String,
}

impl FormatError {
    pub(crate) fn new(offset: usize, msg: impl Into<String>) -> Self {
        Self {
            offset,
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: format error at byte {offset}: {msg}")]
    Format {
        path: String,
        offset: usize,
        msg: String,
    },
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DatasetError {
    pub(crate) fn format(path: &Path, e: FormatError) -> Self {
        DatasetError::Format {
            path: path.display().to_string(),
            offset: e.offset,
            msg: e.msg,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, DatasetError> {
    std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DatasetError::Data(format!("missing file {}", path.display()))
        } else {
            DatasetError::io(path, e)
        }
    })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    std::fs::write(path, bytes).map_err(|e| DatasetError::io(path, e))
}

/// Little-endian cursor over a byte slice that reports offsets on underrun.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn pos(&self) -> usize {
        self.pos
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::new(
                self.pos,
                format!("truncated: need {n} bytes, {} left", self.remaining()),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn magic(&mut self, magic: &[u8; 4]) -> Result<(), FormatError> {
        let got = self.take(4).map_err(|_| FormatError::new(0, "file too short for magic"))?;
        if got != magic {
            return Err(FormatError::new(
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(magic)
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn finish(&self) -> Result<(), FormatError> {
        if self.remaining() != 0 {
            return Err(FormatError::new(
                self.pos,
                format!("{} trailing bytes", self.remaining()),
            ));
        }
        Ok(())
    }
}
