//! Depth-based instance mask refinement and panoptic TSDF fusion for RGB-D sequences.
//!
//! Per frame, depth holes are filled by normalized Gaussian convolution, each
//! thing mask is cut to the depth interval around its dominant density mode
//! (binned FFT KDE with an ISJ bandwidth), and the result is fused into a sparse
//! voxel map that keeps a running signed distance and label votes per voxel.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod dataset;
pub mod depth;
pub mod eval;
pub mod kde;
pub mod pipeline;
pub mod refine;
pub mod tsdf;

pub use camera::{backproject, project_point, CameraError, CameraIntrinsics, Pose};
pub use dataset::{DatasetError, SequenceManifest};
pub use depth::{fill_holes, DepthError, DepthMap, HoleFillConfig};
pub use eval::{dataset_mask_iou, instance_iou, match_instances, EvalError, IouReport};
pub use kde::{
    direct_kde, fft_kde, isj_bandwidth, linear_binning, Bandwidth, BinnedSample, DensityEstimate,
    GridSpec, KdeError,
};
pub use pipeline::{fuse_sequence, refinement_report, PipelineConfig, PipelineError};
pub use refine::{
    refine_all, refine_mask, DepthCutoffs, FrameRefineReport, InstanceMask, PanopticLabel,
    RefineConfig, RefineError, RefinedMask,
};
pub use tsdf::{
    voxel_label, voxel_sdf_update, IntegrationConfig, LabeledRgbdFrame, PanopticVoxelMap,
    TsdfError, Voxel, WeightMode,
};
