//! `PVM1` little-endian map persistence.
//!
//! ```text
//! magic "PVM1" | version u32 | voxel_size f64 | truncation f64 | origin 3 x f64 | voxel_count u64
//! per voxel: i32 x 3 index | f32 tsdf | f32 weight | u16 vote_count
//!            vote_count x (u16 class_id | u32 instance_id | f32 weight)
//! ```
//!
//! Voxels are written in ascending index order and votes in ascending label order,
//! so equal maps serialize to identical bytes.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::DatasetError;
use crate::refine::PanopticLabel;
use crate::tsdf::{PanopticVoxelMap, Voxel};

pub const MAP_MAGIC: [u8; 4] = *b"PVM1";
pub const MAP_VERSION: u32 = 1;

pub fn write_map<W: Write>(map: &PanopticVoxelMap, mut w: W) -> std::io::Result<()> {
    let voxels = map.voxels();
    w.write_all(&MAP_MAGIC)?;
    w.write_all(&MAP_VERSION.to_le_bytes())?;
    w.write_all(&map.voxel_size().to_le_bytes())?;
    w.write_all(&map.truncation().to_le_bytes())?;
    for o in map.origin() {
        w.write_all(&o.to_le_bytes())?;
    }
    w.write_all(&(voxels.len() as u64).to_le_bytes())?;
    for (idx, v) in voxels {
        for i in idx {
            w.write_all(&i.to_le_bytes())?;
        }
        w.write_all(&v.tsdf.to_le_bytes())?;
        w.write_all(&v.weight.to_le_bytes())?;
        let count = u16::try_from(v.votes().len()).map_err(|_| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "more than 65535 labels in one voxel",
            )
        })?;
        w.write_all(&count.to_le_bytes())?;
        for (label, weight) in v.votes() {
            w.write_all(&label.class_id.to_le_bytes())?;
            w.write_all(&label.instance_id.to_le_bytes())?;
            w.write_all(&weight.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn save_map(map: &PanopticVoxelMap, path: &Path) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    write_map(map, BufWriter::new(file)).map_err(|e| DatasetError::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], String> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        self.pos = end;
        Ok(slice.try_into().expect("slice length is N"))
    }

    fn u16(&mut self) -> Result<u16, String> {
        self.take().map(u16::from_le_bytes)
    }
    fn u32(&mut self) -> Result<u32, String> {
        self.take().map(u32::from_le_bytes)
    }
    fn i32(&mut self) -> Result<i32, String> {
        self.take().map(i32::from_le_bytes)
    }
    fn u64(&mut self) -> Result<u64, String> {
        self.take().map(u64::from_le_bytes)
    }
    fn f32(&mut self) -> Result<f32, String> {
        self.take().map(f32::from_le_bytes)
    }
    fn f64(&mut self) -> Result<f64, String> {
        self.take().map(f64::from_le_bytes)
    }
}

/// Parses a serialized map.
pub fn read_map(bytes: &[u8]) -> Result<PanopticVoxelMap, String> {
    let mut c = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = c.take()?;
    if magic != MAP_MAGIC {
        return Err(format!("bad magic {magic:?}"));
    }
    let version = c.u32()?;
    if version != MAP_VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let voxel_size = c.f64()?;
    let truncation = c.f64()?;
    let origin = [c.f64()?, c.f64()?, c.f64()?];
    let mut map =
        PanopticVoxelMap::new(voxel_size, truncation, origin).map_err(|e| e.to_string())?;
    let count = c.u64()?;
    let mut last = None;
    for _ in 0..count {
        let idx = [c.i32()?, c.i32()?, c.i32()?];
        if last.is_some_and(|l| l >= idx) {
            return Err(format!("voxel {idx:?} is out of order or duplicated"));
        }
        last = Some(idx);
        let tsdf = c.f32()?;
        let weight = c.f32()?;
        if !(weight > 0.0) || !tsdf.is_finite() {
            return Err(format!(
                "voxel {idx:?} has invalid tsdf {tsdf} / weight {weight}"
            ));
        }
        let votes = (0..c.u16()?)
            .map(|_| Ok((PanopticLabel::new(c.u16()?, c.u32()?), c.f32()?)))
            .collect::<Result<Vec<_>, String>>()?;
        map.insert(idx, Voxel::from_parts(tsdf, weight, votes));
    }
    if c.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - c.pos));
    }
    Ok(map)
}

pub fn load_map(path: &Path) -> Result<PanopticVoxelMap, DatasetError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| DatasetError::io(path, e))?;
    read_map(&bytes).map_err(|m| DatasetError::format(path, m))
}
