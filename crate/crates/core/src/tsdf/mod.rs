//! Sparse truncated signed distance map with per-voxel panoptic label votes.
//!
//! Voxels live in `8^3` blocks keyed by block coordinate. A voxel is stored once
//! it has received its first observation; blocks without observed voxels are
//! never kept.

mod integrate;
mod surface;

pub use integrate::{IntegrationConfig, IntegrationStats, LabeledRgbdFrame, WeightMode};
pub use surface::{extract_surface_points, zero_crossings, SurfacePoint};

use nalgebra::Point3;
use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::refine::PanopticLabel;

/// Voxels per block edge.
pub const BLOCK_EDGE: i32 = 8;
const BLOCK_VOXELS: usize = (BLOCK_EDGE * BLOCK_EDGE * BLOCK_EDGE) as usize;

/// Integer voxel coordinate; the voxel's center is `origin + (index + 0.5) * voxel_size`.
pub type VoxelIndex = [i32; 3];
pub type BlockIndex = [i32; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TsdfError {
    #[error("observation weight must be positive and finite, got {0}")]
    InvalidWeight(f32),

    #[error("signed distance must be finite, got {0}")]
    InvalidDistance(f32),

    #[error("invalid map parameters: {0}")]
    InvalidParameters(String),

    #[error("frame rejected: {0}")]
    FrameMismatch(String),

    #[error("surface band must be positive, got {0}")]
    InvalidBand(f64),
}

/// Cumulative signed distance, cumulative weight and label votes of one voxel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Voxel {
    pub tsdf: f32,
    pub weight: f32,
    /// Accumulated weight per label, sorted by label.
    votes: Vec<(PanopticLabel, f32)>,
}

impl Voxel {
    /// Assembles a voxel from stored fields; votes are sorted and merged by label.
    pub fn from_parts(tsdf: f32, weight: f32, votes: Vec<(PanopticLabel, f32)>) -> Self {
        let mut v = Self {
            tsdf,
            weight,
            votes: Vec::with_capacity(votes.len()),
        };
        for (label, w) in votes {
            v.add_vote(label, w);
        }
        v
    }

    #[inline]
    pub fn is_observed(&self) -> bool {
        self.weight > 0.0
    }

    #[inline]
    pub fn votes(&self) -> &[(PanopticLabel, f32)] {
        &self.votes
    }

    fn add_vote(&mut self, label: PanopticLabel, w: f32) {
        match self.votes.binary_search_by(|(l, _)| l.cmp(&label)) {
            Ok(i) => self.votes[i].1 += w,
            Err(i) => self.votes.insert(i, (label, w)),
        }
    }
}

/// Folds one observation into the running weighted mean:
/// `D <- (W D + w d) / (W + w)`, `W <- W + w`, and `w` is added to `label`'s vote.
pub fn voxel_sdf_update(
    voxel: &mut Voxel,
    sdf: f32,
    weight: f32,
    label: Option<PanopticLabel>,
) -> Result<(), TsdfError> {
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(TsdfError::InvalidWeight(weight));
    }
    if !sdf.is_finite() {
        return Err(TsdfError::InvalidDistance(sdf));
    }
    let prior = f64::from(voxel.weight);
    let total = prior + f64::from(weight);
    voxel.tsdf =
        ((prior * f64::from(voxel.tsdf) + f64::from(weight) * f64::from(sdf)) / total) as f32;
    voxel.weight = total as f32;
    if let Some(label) = label {
        voxel.add_vote(label, weight);
    }
    Ok(())
}

/// Label with the largest accumulated vote; ties go to the smallest `(class, instance)`.
pub fn voxel_label(voxel: &Voxel) -> Option<PanopticLabel> {
    let mut best: Option<(PanopticLabel, f32)> = None;
    for &(label, w) in &voxel.votes {
        if best.is_none_or(|(_, bw)| w > bw) {
            best = Some((label, w));
        }
    }
    best.map(|(l, _)| l)
}

#[derive(Debug, Clone)]
pub(crate) struct Block {
    voxels: Box<[Voxel]>,
}

impl Block {
    fn new() -> Self {
        Self {
            voxels: vec![Voxel::default(); BLOCK_VOXELS].into_boxed_slice(),
        }
    }

    fn observed(&self) -> usize {
        self.voxels.iter().filter(|v| v.is_observed()).count()
    }
}

#[inline]
fn local_offset(local: [i32; 3]) -> usize {
    (local[0] + BLOCK_EDGE * (local[1] + BLOCK_EDGE * local[2])) as usize
}

#[inline]
fn split_index(idx: VoxelIndex) -> (BlockIndex, usize) {
    let block = idx.map(|i| i.div_euclid(BLOCK_EDGE));
    let local = [0, 1, 2].map(|a| idx[a].rem_euclid(BLOCK_EDGE));
    (block, local_offset(local))
}

#[derive(Debug, Clone)]
pub struct PanopticVoxelMap {
    voxel_size: f64,
    truncation: f64,
    origin: [f64; 3],
    blocks: FxHashMap<BlockIndex, Block>,
}

impl PanopticVoxelMap {
    pub fn new(voxel_size: f64, truncation: f64, origin: [f64; 3]) -> Result<Self, TsdfError> {
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(TsdfError::InvalidParameters(format!(
                "voxel size must be positive, got {voxel_size}"
            )));
        }
        if !(truncation >= voxel_size && truncation.is_finite()) {
            return Err(TsdfError::InvalidParameters(format!(
                "truncation {truncation} must be at least the voxel size {voxel_size}"
            )));
        }
        if !origin.iter().all(|o| o.is_finite()) {
            return Err(TsdfError::InvalidParameters("origin must be finite".into()));
        }
        Ok(Self {
            voxel_size,
            truncation,
            origin,
            blocks: FxHashMap::default(),
        })
    }

    #[inline]
    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    #[inline]
    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    #[inline]
    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    #[inline]
    pub fn block_size(&self) -> f64 {
        self.voxel_size * f64::from(BLOCK_EDGE)
    }

    pub fn voxel_center(&self, idx: VoxelIndex) -> Point3<f64> {
        Point3::new(
            self.origin[0] + (f64::from(idx[0]) + 0.5) * self.voxel_size,
            self.origin[1] + (f64::from(idx[1]) + 0.5) * self.voxel_size,
            self.origin[2] + (f64::from(idx[2]) + 0.5) * self.voxel_size,
        )
    }

    pub fn voxel_index(&self, p: &Point3<f64>) -> VoxelIndex {
        [0, 1, 2].map(|a| ((p[a] - self.origin[a]) / self.voxel_size).floor() as i32)
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn observed_count(&self) -> usize {
        self.blocks.values().map(Block::observed).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// The voxel at `idx`, if it has been observed.
    pub fn get(&self, idx: VoxelIndex) -> Option<&Voxel> {
        let (block, offset) = split_index(idx);
        self.blocks
            .get(&block)
            .map(|b| &b.voxels[offset])
            .filter(|v| v.is_observed())
    }

    /// Stores `voxel` at `idx`. Unobserved voxels are not stored.
    pub fn insert(&mut self, idx: VoxelIndex, voxel: Voxel) {
        if !voxel.is_observed() {
            return;
        }
        let (block, offset) = split_index(idx);
        self.blocks.entry(block).or_insert_with(Block::new).voxels[offset] = voxel;
    }

    /// Observed voxels in ascending index order.
    pub fn voxels(&self) -> Vec<(VoxelIndex, &Voxel)> {
        let mut out = Vec::with_capacity(self.observed_count());
        for (b, block) in &self.blocks {
            for (offset, v) in block.voxels.iter().enumerate() {
                if v.is_observed() {
                    let o = offset as i32;
                    let local = [
                        o % BLOCK_EDGE,
                        (o / BLOCK_EDGE) % BLOCK_EDGE,
                        o / (BLOCK_EDGE * BLOCK_EDGE),
                    ];
                    out.push(([0, 1, 2].map(|a| b[a] * BLOCK_EDGE + local[a]), v));
                }
            }
        }
        out.sort_unstable_by_key(|(idx, _)| *idx);
        out
    }
}

impl PartialEq for PanopticVoxelMap {
    /// Same parameters and the same observed voxels, compared field by field.
    fn eq(&self, other: &Self) -> bool {
        self.voxel_size == other.voxel_size
            && self.truncation == other.truncation
            && self.origin == other.origin
            && self.voxels() == other.voxels()
    }
}
