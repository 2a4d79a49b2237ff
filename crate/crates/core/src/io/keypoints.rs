use std::path::Path;

use super::{read_file, write_file, DatasetError, FormatError, Reader};
use crate::descriptor::{Descriptor, DESCRIPTOR_BYTES};

const KPT_MAGIC: &[u8; 4] = b"KPT1";
const RECORD_BYTES: usize = 4 + 4 + 4 + 1 + DESCRIPTOR_BYTES;
pub const MAX_OCTAVE: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeypointRecord {
    pub u: f32,
    pub v: f32,
    pub response: f32,
    pub octave: u8,
    pub descriptor: Descriptor,
}

impl KeypointRecord {
    pub fn pixel(&self) -> crate::geometry::Pixel {
        crate::geometry::Pixel::new(self.u as f64, self.v as f64)
    }

    pub fn in_bounds(&self, width: usize, height: usize) -> bool {
        self.u >= 0.0 && self.v >= 0.0 && (self.u as f64) < width as f64 && (self.v as f64) < height as f64
    }
}

pub fn encode_keypoints(records: &[KeypointRecord]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + RECORD_BYTES * records.len());
    out.extend_from_slice(KPT_MAGIC);
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        out.extend_from_slice(&r.u.to_le_bytes());
        out.extend_from_slice(&r.v.to_le_bytes());
        out.extend_from_slice(&r.response.to_le_bytes());
        out.push(r.octave);
        out.extend_from_slice(&r.descriptor.0);
    }
    out
}

pub fn decode_keypoints(bytes: &[u8]) -> Result<Vec<KeypointRecord>, FormatError> {
    let mut rd = Reader::new(bytes);
    rd.magic(KPT_MAGIC)?;
    let n = rd.u32()? as usize;
    let expected = n.checked_mul(RECORD_BYTES);
    if expected != Some(rd.remaining()) {
        return Err(FormatError::new(
            4,
            format!(
                "count {n} implies {} payload bytes, file has {}",
                expected.map_or("overflowing".to_string(), |e| e.to_string()),
                rd.remaining()
            ),
        ));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rd.f32()?;
        let v = rd.f32()?;
        let response = rd.f32()?;
        let at = rd.pos();
        let octave = rd.u8()?;
        if octave > MAX_OCTAVE {
            return Err(FormatError::new(at, format!("octave {octave} exceeds {MAX_OCTAVE}")));
        }
        let descriptor = Descriptor(rd.take(DESCRIPTOR_BYTES)?.try_into().unwrap());
        out.push(KeypointRecord {
            u,
            v,
            response,
            octave,
            descriptor,
        });
    }
    Ok(out)
}

pub fn write_keypoints(path: &Path, records: &[KeypointRecord]) -> Result<(), DatasetError> {
    write_file(path, &encode_keypoints(records))
}

pub fn read_keypoints(path: &Path) -> Result<Vec<KeypointRecord>, DatasetError> {
    let bytes = read_file(path)?;
    decode_keypoints(&bytes).map_err(|e| DatasetError::format(path, e))
}
