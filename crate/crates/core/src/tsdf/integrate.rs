use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use rustc_hash::FxHashSet;

use super::{
    local_offset, voxel_sdf_update, Block, BlockIndex, PanopticVoxelMap, TsdfError, BLOCK_EDGE,
};
use crate::camera::{CameraIntrinsics, Pose};
use crate::depth::DepthMap;
use crate::refine::{InstanceMask, PanopticLabel};

/// Per-observation weight.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum WeightMode {
    #[default]
    Constant,
    /// `1 / z^2` of the measured depth.
    InverseSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegrationConfig {
    pub weight_mode: WeightMode,
    /// Update blocks on the rayon pool. The result is identical to the serial path.
    pub parallel: bool,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            weight_mode: WeightMode::Constant,
            parallel: true,
        }
    }
}

/// One posed RGB-D observation with its (refined) instance masks.
#[derive(Debug, Clone)]
pub struct LabeledRgbdFrame {
    pub depth: DepthMap,
    pub masks: Vec<InstanceMask>,
    pub intrinsics: CameraIntrinsics,
    /// Camera-to-world.
    pub pose: Pose,
    pub rgb: Option<Vec<[u8; 3]>>,
}

impl LabeledRgbdFrame {
    fn validate(&self) -> Result<(), TsdfError> {
        let k = &self.intrinsics;
        k.validate()
            .map_err(|e| TsdfError::FrameMismatch(e.to_string()))?;
        let (w, h) = (self.depth.width(), self.depth.height());
        if (w, h) != (k.width, k.height) {
            return Err(TsdfError::FrameMismatch(format!(
                "depth is {w}x{h} but intrinsics are {}x{}",
                k.width, k.height
            )));
        }
        if let Some(m) = self
            .masks
            .iter()
            .find(|m| (m.width(), m.height()) != (w, h))
        {
            return Err(TsdfError::FrameMismatch(format!(
                "mask {} is {}x{} but depth is {w}x{h}",
                m.label,
                m.width(),
                m.height()
            )));
        }
        if let Some(rgb) = &self.rgb {
            if rgb.len() != w * h {
                return Err(TsdfError::FrameMismatch(format!(
                    "rgb has {} pixels, expected {}",
                    rgb.len(),
                    w * h
                )));
            }
        }
        Ok(())
    }

    /// Per-pixel label; where masks overlap the later mask wins.
    pub fn label_image(&self) -> Vec<Option<PanopticLabel>> {
        let mut labels = vec![None; self.depth.width() * self.depth.height()];
        for mask in &self.masks {
            for (dst, &set) in labels.iter_mut().zip(mask.bits()) {
                if set {
                    *dst = Some(mask.label);
                }
            }
        }
        labels
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    /// Blocks intersected by the truncation band of some valid pixel.
    pub candidate_blocks: usize,
    pub voxels_updated: usize,
    /// Voxels observed for the first time.
    pub voxels_allocated: usize,
    pub labeled_updates: usize,
}

impl std::ops::AddAssign for IntegrationStats {
    fn add_assign(&mut self, o: Self) {
        self.candidate_blocks += o.candidate_blocks;
        self.voxels_updated += o.voxels_updated;
        self.voxels_allocated += o.voxels_allocated;
        self.labeled_updates += o.labeled_updates;
    }
}

/// Visits every block cell pierced by the segment `a -> b` (block units).
fn traverse_blocks(a: Vector3<f64>, b: Vector3<f64>, mut visit: impl FnMut(BlockIndex)) {
    let mut cell = [a.x.floor() as i32, a.y.floor() as i32, a.z.floor() as i32];
    let end = [b.x.floor() as i32, b.y.floor() as i32, b.z.floor() as i32];
    let dir = b - a;
    let mut step = [0i32; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for axis in 0..3 {
        if dir[axis] > 0.0 {
            step[axis] = 1;
            t_max[axis] = (f64::from(cell[axis]) + 1.0 - a[axis]) / dir[axis];
            t_delta[axis] = 1.0 / dir[axis];
        } else if dir[axis] < 0.0 {
            step[axis] = -1;
            t_max[axis] = (f64::from(cell[axis]) - a[axis]) / dir[axis];
            t_delta[axis] = -1.0 / dir[axis];
        }
    }
    visit(cell);
    let budget: i32 = (0..3).map(|i| (end[i] - cell[i]).abs()).sum();
    for _ in 0..budget {
        let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        if t_max[axis] > 1.0 {
            break;
        }
        cell[axis] += step[axis];
        t_max[axis] += t_delta[axis];
        visit(cell);
    }
}

/// Immutable per-frame data shared by all block updates.
struct FrameView<'a> {
    depth: &'a DepthMap,
    labels: Vec<Option<PanopticLabel>>,
    k: CameraIntrinsics,
    pose: Pose,
    weight_mode: WeightMode,
    truncation: f64,
    voxel_size: f64,
    origin: [f64; 3],
}

impl FrameView<'_> {
    fn update_block(&self, key: BlockIndex, block: &mut Block) -> IntegrationStats {
        let mut stats = IntegrationStats::default();
        let rot_t = self.pose.rotation().transpose();
        let t = self.pose.translation();
        let w = self.k.width;
        for lz in 0..BLOCK_EDGE {
            for ly in 0..BLOCK_EDGE {
                for lx in 0..BLOCK_EDGE {
                    let idx = [
                        key[0] * BLOCK_EDGE + lx,
                        key[1] * BLOCK_EDGE + ly,
                        key[2] * BLOCK_EDGE + lz,
                    ];
                    let world = Vector3::new(
                        self.origin[0] + (f64::from(idx[0]) + 0.5) * self.voxel_size,
                        self.origin[1] + (f64::from(idx[1]) + 0.5) * self.voxel_size,
                        self.origin[2] + (f64::from(idx[2]) + 0.5) * self.voxel_size,
                    );
                    let p = rot_t * (world - t);
                    if !(p.z > 0.0) {
                        continue;
                    }
                    let u = self.k.fx * p.x / p.z + self.k.cx;
                    let v = self.k.fy * p.y / p.z + self.k.cy;
                    if !self.k.in_bounds(u, v) {
                        continue;
                    }
                    let pixel = v.round() as usize * w + u.round() as usize;
                    let measured = f64::from(self.depth.values()[pixel]);
                    if measured <= 0.0 {
                        continue;
                    }
                    let sdf = measured - p.z;
                    if sdf < -self.truncation {
                        continue;
                    }
                    let sdf = sdf.min(self.truncation) as f32;
                    let weight = match self.weight_mode {
                        WeightMode::Constant => 1.0,
                        WeightMode::InverseSquare => (1.0 / (measured * measured)) as f32,
                    };
                    let label = self.labels[pixel];
                    let voxel = &mut block.voxels[local_offset([lx, ly, lz])];
                    if !voxel.is_observed() {
                        stats.voxels_allocated += 1;
                    }
                    voxel_sdf_update(voxel, sdf, weight, label)
                        .expect("weight and distance are finite and positive by construction");
                    stats.voxels_updated += 1;
                    stats.labeled_updates += usize::from(label.is_some());
                }
            }
        }
        stats
    }
}

impl PanopticVoxelMap {
    /// Blocks pierced by the truncation band `[z - tau, z + tau]` of any valid pixel.
    fn candidate_blocks(
        &self,
        depth: &DepthMap,
        k: &CameraIntrinsics,
        pose: &Pose,
    ) -> Vec<BlockIndex> {
        let mut seen: FxHashSet<BlockIndex> = FxHashSet::default();
        let inv_block = 1.0 / self.block_size();
        let origin = Vector3::from(self.origin);
        let to_block_units = |p_cam: Vector3<f64>| {
            (pose.transform_point(&Point3::from(p_cam)).coords - origin) * inv_block
        };
        let mut last = None;
        for (i, &d) in depth.values().iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            let (u, v) = ((i % k.width) as f64, (i / k.width) as f64);
            let ray = Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
            let z = f64::from(d);
            let near = to_block_units(ray * (z - self.truncation).max(1e-3));
            let far = to_block_units(ray * (z + self.truncation));
            traverse_blocks(near, far, |b| {
                if last != Some(b) {
                    seen.insert(b);
                    last = Some(b);
                }
            });
        }
        let mut keys: Vec<BlockIndex> = seen.into_iter().collect();
        keys.sort_unstable();
        keys
    }

    /// Fuses one frame by projective truncated signed distance.
    ///
    /// Every voxel in a block touched by some pixel's truncation band is projected
    /// into the image. Voxels landing on a valid depth pixel receive
    /// `clamp(depth - z_voxel, .., tau)` unless they lie more than `tau` behind the
    /// surface, together with the label of that pixel if it has one. The map is
    /// left untouched when the frame is inconsistent.
    pub fn integrate_frame(
        &mut self,
        frame: &LabeledRgbdFrame,
        cfg: &IntegrationConfig,
    ) -> Result<IntegrationStats, TsdfError> {
        frame.validate()?;
        let keys = self.candidate_blocks(&frame.depth, &frame.intrinsics, &frame.pose);
        let view = FrameView {
            depth: &frame.depth,
            labels: frame.label_image(),
            k: frame.intrinsics,
            pose: frame.pose,
            weight_mode: cfg.weight_mode,
            truncation: self.truncation,
            voxel_size: self.voxel_size,
            origin: self.origin,
        };

        let mut work: Vec<(BlockIndex, Block)> = keys
            .iter()
            .map(|k| (*k, self.blocks.remove(k).unwrap_or_else(Block::new)))
            .collect();
        let per_block: Vec<IntegrationStats> = if cfg.parallel {
            work.par_iter_mut()
                .map(|(key, block)| view.update_block(*key, block))
                .collect()
        } else {
            work.iter_mut()
                .map(|(key, block)| view.update_block(*key, block))
                .collect()
        };

        let mut stats = IntegrationStats {
            candidate_blocks: keys.len(),
            ..Default::default()
        };
        per_block.into_iter().for_each(|s| stats += s);
        for (key, block) in work {
            if block.voxels.iter().any(|v| v.is_observed()) {
                self.blocks.insert(key, block);
            }
        }
        Ok(stats)
    }
}
