//! Sequence-level orchestration: hole filling, optional refinement, fusion and
//! the refined-vs-unrefined comparison.

use std::time::Instant;

use thiserror::Error;

use crate::dataset::{DatasetError, Frame, SequenceManifest, SequenceReader};
use crate::depth::{fill_holes, DepthError, DepthMap, HoleFillConfig};
use crate::eval::{
    dataset_mask_iou, ComparisonTable, EvalError, IouReport, WITHOUT_REFINEMENT, WITH_REFINEMENT,
};
use crate::refine::{refine_all, FrameRefineReport, InstanceMask, RefineConfig, RefineError};
use crate::tsdf::{
    IntegrationConfig, IntegrationStats, LabeledRgbdFrame, PanopticVoxelMap, TsdfError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("hole filling: {0}")]
    Depth(#[from] DepthError),
    #[error("refinement: {0}")]
    Refine(#[from] RefineError),
    #[error("integration: {0}")]
    Tsdf(#[from] TsdfError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("sequence {0} has no frames")]
    EmptySequence(String),
    #[error("frame {0} has no ground-truth masks")]
    MissingGroundTruth(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub hole_fill: HoleFillConfig,
    pub refine: RefineConfig,
    pub refine_enabled: bool,
    pub integration: IntegrationConfig,
    pub voxel_size: f64,
    pub truncation: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            hole_fill: HoleFillConfig::default(),
            refine: RefineConfig::default(),
            refine_enabled: true,
            integration: IntegrationConfig::default(),
            voxel_size: 0.05,
            truncation: 0.2,
        }
    }
}

impl PipelineConfig {
    /// Refinement settings with the sequence's stuff classes added and the
    /// bandwidth bounded below by one depth quantum.
    pub fn refine_for(&self, manifest: &SequenceManifest) -> RefineConfig {
        let mut cfg = self.refine.clone();
        cfg.stuff_classes.extend(manifest.stuff_classes());
        cfg.min_bandwidth = cfg.min_bandwidth.max(1.0 / manifest.intrinsics.depth_scale);
        cfg
    }
}

/// A frame after hole filling and (optionally) refinement.
#[derive(Debug, Clone)]
pub struct PreparedFrame {
    pub depth: DepthMap,
    pub masks: Vec<InstanceMask>,
    /// `None` when refinement is disabled.
    pub report: Option<FrameRefineReport>,
}

pub fn prepare_frame(
    frame: &Frame,
    hole_fill: &HoleFillConfig,
    refine: Option<&RefineConfig>,
) -> Result<PreparedFrame, PipelineError> {
    let depth = fill_holes(&frame.depth, hole_fill)?;
    let (masks, report) = match refine {
        Some(cfg) => {
            let (refined, report) = refine_all(&frame.masks, &depth, cfg)?;
            (refined.into_iter().map(|r| r.mask).collect(), Some(report))
        }
        None => (frame.masks.clone(), None),
    };
    Ok(PreparedFrame {
        depth,
        masks,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct FuseOutput {
    pub map: PanopticVoxelMap,
    pub stats: IntegrationStats,
    /// Summed over frames; all zero when refinement is disabled.
    pub refine: FrameRefineReport,
    pub frames: usize,
}

/// Fuses every frame of the sequence into a new map whose origin is the world origin.
pub fn fuse_sequence(
    mut reader: SequenceReader,
    cfg: &PipelineConfig,
) -> Result<FuseOutput, PipelineError> {
    let manifest = reader.manifest().clone();
    if reader.is_empty() {
        return Err(PipelineError::EmptySequence(
            manifest.root.display().to_string(),
        ));
    }
    let refine_cfg = cfg.refine_for(&manifest);
    let refine = cfg.refine_enabled.then_some(&refine_cfg);
    let mut map = PanopticVoxelMap::new(cfg.voxel_size, cfg.truncation, [0.0; 3])?;
    let mut stats = IntegrationStats::default();
    let mut totals = FrameRefineReport::default();
    let mut frames = 0;
    reader.rewind();
    for frame in reader {
        let frame = frame?;
        let start = Instant::now();
        let prepared = prepare_frame(&frame, &cfg.hole_fill, refine)?;
        if let Some(r) = prepared.report {
            totals.refined += r.refined;
            totals.skipped += r.skipped;
            totals.passed_through += r.passed_through;
            totals.pixels_removed += r.pixels_removed;
        }
        let labeled = LabeledRgbdFrame {
            depth: prepared.depth,
            masks: prepared.masks,
            intrinsics: manifest.intrinsics,
            pose: frame.pose,
            rgb: frame.rgb,
        };
        stats += map.integrate_frame(&labeled, &cfg.integration)?;
        frames += 1;
        log::info!(
            "frame {} fused in {:.1} ms ({} voxels)",
            frame.index,
            start.elapsed().as_secs_f64() * 1e3,
            map.observed_count()
        );
    }
    Ok(FuseOutput {
        map,
        stats,
        refine: totals,
        frames,
    })
}

/// Mask IOU of the thing instances with and without refinement.
pub fn refinement_report(
    mut reader: SequenceReader,
    cfg: &PipelineConfig,
) -> Result<(ComparisonTable, [IouReport; 2]), PipelineError> {
    let manifest = reader.manifest().clone();
    if reader.is_empty() {
        return Err(PipelineError::EmptySequence(
            manifest.root.display().to_string(),
        ));
    }
    let refine_cfg = cfg.refine_for(&manifest);
    let things = |masks: Vec<InstanceMask>| -> Vec<InstanceMask> {
        masks
            .into_iter()
            .filter(|m| manifest.is_thing(m.label.class_id))
            .collect()
    };
    let (mut raw, mut refined, mut gts) = (Vec::new(), Vec::new(), Vec::new());
    reader.rewind();
    for frame in reader {
        let frame = frame?;
        let gt = frame
            .gt_masks
            .clone()
            .ok_or(PipelineError::MissingGroundTruth(frame.index))?;
        let prepared = prepare_frame(&frame, &cfg.hole_fill, Some(&refine_cfg))?;
        raw.push(things(frame.masks));
        refined.push(things(prepared.masks));
        gts.push(things(gt));
        log::info!("frame {} evaluated", frame.index);
    }
    let without = dataset_mask_iou(&raw, &gts, WITHOUT_REFINEMENT)?;
    let with = dataset_mask_iou(&refined, &gts, WITH_REFINEMENT)?;
    let table = ComparisonTable::from_reports(&[without.clone(), with.clone()]);
    Ok((table, [without, with]))
}
