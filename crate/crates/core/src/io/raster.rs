use std::collections::HashSet;
use std::path::Path;

use super::{read_file, write_file, DatasetError, FormatError, Reader};

const DEPTH_MAGIC: &[u8; 4] = b"DPD1";
const MASK_MAGIC: &[u8; 4] = b"MSK1";

/// Row-major z-depth in metres. A value is valid iff finite and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthRaster {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

#[inline]
pub(crate) fn depth_valid(d: f32) -> bool {
    d.is_finite() && d > 0.0
}

impl DepthRaster {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f32>) -> Self {
        assert_eq!(values.len(), width * height, "raster size mismatch");
        Self {
            width,
            height,
            values,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: f32) {
        self.values[y * self.width + x] = d;
    }

    /// Depth at `(x, y)` if it is valid.
    pub fn valid_at(&self, x: usize, y: usize) -> Option<f32> {
        let d = self.get(x, y);
        depth_valid(d).then_some(d)
    }

    pub fn is_valid(d: f32) -> bool {
        depth_valid(d)
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|d| depth_valid(**d)).count()
    }
}

pub fn encode_depth(r: &DepthRaster) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * r.values.len());
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&(r.width as u32).to_le_bytes());
    out.extend_from_slice(&(r.height as u32).to_le_bytes());
    for &d in &r.values {
        let d = if depth_valid(d) { d } else { 0.0 };
        out.extend_from_slice(&d.to_le_bytes());
    }
    out
}

fn dims(rd: &mut Reader<'_>, bytes_per_px: usize) -> Result<(usize, usize, usize), FormatError> {
    let w = rd.u32()? as usize;
    let h = rd.u32()? as usize;
    let n = w
        .checked_mul(h)
        .filter(|n| n.checked_mul(bytes_per_px).is_some())
        .ok_or_else(|| FormatError::new(4, format!("dimension overflow {w}x{h}")))?;
    Ok((w, h, n))
}

pub fn decode_depth(bytes: &[u8]) -> Result<DepthRaster, FormatError> {
    let mut rd = Reader::new(bytes);
    rd.magic(DEPTH_MAGIC)?;
    let (w, h, n) = dims(&mut rd, 4)?;
    if rd.remaining() < n * 4 {
        return Err(FormatError::new(
            rd.pos(),
            format!("truncated payload: {w}x{h} needs {} bytes, {} left", n * 4, rd.remaining()),
        ));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(rd.f32()?);
    }
    rd.finish()?;
    Ok(DepthRaster {
        width: w,
        height: h,
        values,
    })
}

pub fn write_depth(path: &Path, r: &DepthRaster) -> Result<(), DatasetError> {
    write_file(path, &encode_depth(r))
}

pub fn read_depth(path: &Path) -> Result<DepthRaster, DatasetError> {
    let bytes = read_file(path)?;
    decode_depth(&bytes).map_err(|e| DatasetError::format(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InstanceInfo {
    pub id: u16,
    pub class_id: u16,
}

/// Per-pixel instance ids (0 = background) plus the instance/class table.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMaskRaster {
    pub width: usize,
    pub height: usize,
    pub instances: Vec<InstanceInfo>,
    pub ids: Vec<u16>,
}

impl InstanceMaskRaster {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            instances: Vec::new(),
            ids: vec![0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.ids[y * self.width + x]
    }

    pub fn class_of(&self, id: u16) -> Option<u16> {
        self.instances.iter().find(|i| i.id == id).map(|i| i.class_id)
    }

    pub fn area(&self, id: u16) -> usize {
        self.ids.iter().filter(|&&p| p == id).count()
    }

    /// Checks table/payload consistency, returning the offending pixel index on failure.
    pub fn validate(&self) -> Result<(), String> {
        if self.ids.len() != self.width * self.height {
            return Err("pixel payload size mismatch".into());
        }
        let mut known = HashSet::new();
        for inst in &self.instances {
            if inst.id == 0 {
                return Err("instance id 0 is reserved for background".into());
            }
            if !known.insert(inst.id) {
                return Err(format!("duplicate instance id {}", inst.id));
            }
        }
        if let Some((i, id)) = self
            .ids
            .iter()
            .enumerate()
            .find(|(_, &id)| id != 0 && !known.contains(&id))
        {
            return Err(format!("pixel {i} carries unknown instance id {id}"));
        }
        Ok(())
    }
}

pub fn encode_mask(m: &InstanceMaskRaster) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + 4 * m.instances.len() + 2 * m.ids.len());
    out.extend_from_slice(MASK_MAGIC);
    out.extend_from_slice(&(m.width as u32).to_le_bytes());
    out.extend_from_slice(&(m.height as u32).to_le_bytes());
    out.extend_from_slice(&(m.instances.len() as u16).to_le_bytes());
    for inst in &m.instances {
        out.extend_from_slice(&inst.id.to_le_bytes());
        out.extend_from_slice(&inst.class_id.to_le_bytes());
    }
    for &id in &m.ids {
        out.extend_from_slice(&id.to_le_bytes());
    }
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<InstanceMaskRaster, FormatError> {
    let mut rd = Reader::new(bytes);
    rd.magic(MASK_MAGIC)?;
    let (w, h, n) = dims(&mut rd, 2)?;
    let count = rd.u16()? as usize;
    let mut instances = Vec::with_capacity(count);
    let mut known = HashSet::new();
    for _ in 0..count {
        let at = rd.pos();
        let id = rd.u16()?;
        let class_id = rd.u16()?;
        if id == 0 {
            return Err(FormatError::new(at, "instance id 0 is reserved"));
        }
        if !known.insert(id) {
            return Err(FormatError::new(at, format!("duplicate instance id {id}")));
        }
        instances.push(InstanceInfo { id, class_id });
    }
    if rd.remaining() < n * 2 {
        return Err(FormatError::new(
            rd.pos(),
            format!("truncated payload: {w}x{h} needs {} bytes, {} left", n * 2, rd.remaining()),
        ));
    }
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let at = rd.pos();
        let id = rd.u16()?;
        if id != 0 && !known.contains(&id) {
            return Err(FormatError::new(at, format!("unknown instance id {id} in pixel payload")));
        }
        ids.push(id);
    }
    rd.finish()?;
    Ok(InstanceMaskRaster {
        width: w,
        height: h,
        instances,
        ids,
    })
}

pub fn write_mask(path: &Path, m: &InstanceMaskRaster) -> Result<(), DatasetError> {
    m.validate().map_err(DatasetError::Data)?;
    write_file(path, &encode_mask(m))
}

pub fn read_mask(path: &Path) -> Result<InstanceMaskRaster, DatasetError> {
    let bytes = read_file(path)?;
    decode_mask(&bytes).map_err(|e| DatasetError::format(path, e))
}
