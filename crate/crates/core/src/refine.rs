//! Instance mask refinement by depth-density cutoffs.
//!
//! For every instance the depths under its mask are turned into a density
//! estimate. Walking outward from the dominant peak, the first grid point on each
//! side where the density drops below a threshold marks the boundary between the
//! object and whatever leaked into its mask. Pixels beyond either cutoff, and
//! pixels without depth, are removed from the mask.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::depth::DepthMap;
use crate::kde::{
    fft_kde, grid_with_padding, isj_bandwidth, linear_binning, make_grid, Bandwidth,
    BandwidthMethod, DensityEstimate, KdeError,
};

/// Density threshold (per meter) at which a tail counts as disconnected.
pub const DEFAULT_DENSITY_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefineError {
    #[error("mask is {mask_w}x{mask_h} but depth map is {depth_w}x{depth_h}")]
    DimensionMismatch {
        mask_w: usize,
        mask_h: usize,
        depth_w: usize,
        depth_h: usize,
    },

    #[error("density is flat; no refinement possible")]
    FlatDensity,

    #[error("density threshold must be positive, got {0}")]
    InvalidThreshold(f64),

    #[error(transparent)]
    Kde(#[from] KdeError),
}

/// Panoptic identity of a segment. Ordering is by class, then instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PanopticLabel {
    pub class_id: u16,
    pub instance_id: u32,
}

impl PanopticLabel {
    pub const fn new(class_id: u16, instance_id: u32) -> Self {
        Self {
            class_id,
            instance_id,
        }
    }
}

impl fmt::Display for PanopticLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.class_id, self.instance_id)
    }
}

/// Binary pixel mask of one segment, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    pub label: PanopticLabel,
}

impl InstanceMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>, label: PanopticLabel) -> Self {
        assert_eq!(
            bits.len(),
            width * height,
            "bitmap size does not match dimensions"
        );
        Self {
            width,
            height,
            bits,
            label,
        }
    }

    pub fn empty(width: usize, height: usize, label: PanopticLabel) -> Self {
        Self::new(width, height, vec![false; width * height], label)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &InstanceMask) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    fn check_dims(&self, depth: &DepthMap) -> Result<(), RefineError> {
        if self.width != depth.width() || self.height != depth.height() {
            return Err(RefineError::DimensionMismatch {
                mask_w: self.width,
                mask_h: self.height,
                depth_w: depth.width(),
                depth_h: depth.height(),
            });
        }
        Ok(())
    }
}

/// Accepted depth interval `[low, high]` in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthCutoffs {
    pub low: f64,
    pub high: f64,
}

impl DepthCutoffs {
    #[inline]
    pub fn contains(&self, depth: f64) -> bool {
        depth >= self.low && depth <= self.high
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    /// Number of KDE grid points.
    pub grid_points: usize,
    /// Grid padding beyond the sample extremes, in bandwidths.
    pub padding_bandwidths: f64,
    pub density_threshold: f64,
    /// Lower bound on the bandwidth in meters, typically the depth quantum.
    /// Below it, quantized depths turn into isolated spikes.
    pub min_bandwidth: f64,
    /// Masks with fewer valid depth samples are left untouched.
    pub min_samples: usize,
    /// Classes that are passed through without refinement.
    pub stuff_classes: BTreeSet<u16>,
    pub parallel: bool,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            grid_points: 1024,
            padding_bandwidths: 3.0,
            density_threshold: DEFAULT_DENSITY_THRESHOLD,
            min_bandwidth: 0.0,
            min_samples: 32,
            stuff_classes: BTreeSet::new(),
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkipReason {
    EmptyMask,
    TooFewSamples(usize),
    DegenerateDepth,
    FlatDensity,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefineStatus {
    Refined {
        cutoffs: DepthCutoffs,
        bandwidth: Bandwidth,
        removed: usize,
    },
    /// The mask was returned unchanged.
    Skipped(SkipReason),
    /// Stuff class; refinement does not apply.
    PassedThrough,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedMask {
    pub mask: InstanceMask,
    pub status: RefineStatus,
}

/// Per-frame tally of refinement outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameRefineReport {
    pub refined: usize,
    pub skipped: usize,
    pub passed_through: usize,
    pub pixels_removed: usize,
}

impl FrameRefineReport {
    fn record(&mut self, status: &RefineStatus) {
        match status {
            RefineStatus::Refined { removed, .. } => {
                self.refined += 1;
                self.pixels_removed += removed;
            }
            RefineStatus::Skipped(_) => self.skipped += 1,
            RefineStatus::PassedThrough => self.passed_through += 1,
        }
    }
}

/// Non-zero depths under the mask, in row-major order.
pub fn extract_instance_depths(
    mask: &InstanceMask,
    depth: &DepthMap,
) -> Result<Vec<f64>, RefineError> {
    mask.check_dims(depth)?;
    Ok(mask
        .bits
        .iter()
        .zip(depth.values())
        .filter(|(set, d)| **set && **d > 0.0)
        .map(|(_, d)| f64::from(*d))
        .collect())
}

/// Depth interval around the density peak bounded by the nearest sub-threshold
/// grid points. A side without such a point extends to the grid edge.
pub fn find_cutoffs(
    density: &DensityEstimate,
    threshold: f64,
) -> Result<DepthCutoffs, RefineError> {
    if !(threshold > 0.0) {
        return Err(RefineError::InvalidThreshold(threshold));
    }
    let d = density.densities();
    let peak = density.peak_index();
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    if !(d[peak] > 0.0) || d[peak] == min {
        return Err(RefineError::FlatDensity);
    }
    let grid = density.grid();
    let low = (0..peak)
        .rev()
        .find(|&j| d[j] < threshold)
        .map_or(grid.start(), |j| grid.point(j));
    let high = (peak + 1..d.len())
        .find(|&j| d[j] < threshold)
        .map_or(grid.end(), |j| grid.point(j));
    Ok(DepthCutoffs { low, high })
}

/// Bins `samples`, picks the ISJ bandwidth (raised to `cfg.min_bandwidth` if
/// smaller) and evaluates the binned estimate.
///
/// The grid is first padded by Silverman bandwidths; if the selected bandwidth
/// asks for more room the samples are re-binned on a wider grid.
pub fn estimate_depth_density(
    samples: &[f64],
    cfg: &RefineConfig,
) -> Result<(DensityEstimate, Bandwidth), KdeError> {
    let grid = make_grid(samples, cfg.grid_points, cfg.padding_bandwidths)?;
    let mut binned = linear_binning(samples, &grid)?;
    let mut bandwidth = isj_bandwidth(&binned)?;
    if bandwidth.value < cfg.min_bandwidth {
        bandwidth = Bandwidth {
            value: cfg.min_bandwidth,
            method: BandwidthMethod::Floor,
        };
    }
    let wanted = cfg.padding_bandwidths * bandwidth.value;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    if grid.start() > lo - wanted {
        let wider = grid_with_padding(samples, cfg.grid_points, wanted)?;
        binned = linear_binning(samples, &wider)?;
    }
    Ok((fft_kde(&binned, bandwidth.value)?, bandwidth))
}

/// Refines one mask against `depth`. The result is always a subset of the input.
pub fn refine_mask(
    mask: &InstanceMask,
    depth: &DepthMap,
    cfg: &RefineConfig,
) -> Result<RefinedMask, RefineError> {
    mask.check_dims(depth)?;
    if cfg.stuff_classes.contains(&mask.label.class_id) {
        return Ok(RefinedMask {
            mask: mask.clone(),
            status: RefineStatus::PassedThrough,
        });
    }
    let skipped = |reason| {
        Ok(RefinedMask {
            mask: mask.clone(),
            status: RefineStatus::Skipped(reason),
        })
    };
    if mask.is_empty() {
        return skipped(SkipReason::EmptyMask);
    }
    let samples = extract_instance_depths(mask, depth)?;
    if samples.len() < cfg.min_samples.max(2) {
        return skipped(SkipReason::TooFewSamples(samples.len()));
    }
    let (density, bandwidth) = match estimate_depth_density(&samples, cfg) {
        Ok(v) => v,
        Err(KdeError::Degenerate { .. }) => return skipped(SkipReason::DegenerateDepth),
        Err(e) => return Err(e.into()),
    };
    let cutoffs = match find_cutoffs(&density, cfg.density_threshold) {
        Ok(c) => c,
        Err(RefineError::FlatDensity) => return skipped(SkipReason::FlatDensity),
        Err(e) => return Err(e),
    };

    let mut refined = mask.clone();
    let mut removed = 0;
    for (bit, &d) in refined.bits.iter_mut().zip(depth.values()) {
        if *bit && !(d > 0.0 && cutoffs.contains(f64::from(d))) {
            *bit = false;
            removed += 1;
        }
    }
    Ok(RefinedMask {
        mask: refined,
        status: RefineStatus::Refined {
            cutoffs,
            bandwidth,
            removed,
        },
    })
}

/// Refines every mask independently against the same depth map. Output order
/// follows input order and does not depend on `cfg.parallel`.
pub fn refine_all(
    masks: &[InstanceMask],
    depth: &DepthMap,
    cfg: &RefineConfig,
) -> Result<(Vec<RefinedMask>, FrameRefineReport), RefineError> {
    let results: Result<Vec<RefinedMask>, RefineError> = if cfg.parallel {
        masks
            .par_iter()
            .map(|m| refine_mask(m, depth, cfg))
            .collect()
    } else {
        masks.iter().map(|m| refine_mask(m, depth, cfg)).collect()
    };
    let results = results?;
    let mut report = FrameRefineReport::default();
    for r in &results {
        report.record(&r.status);
    }
    Ok((results, report))
}
