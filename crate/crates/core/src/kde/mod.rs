//! One-dimensional Gaussian kernel density estimation.
//!
//! Samples are linearly binned onto an equidistant grid, the bandwidth is chosen
//! with the Improved Sheather-Jones plug-in rule, and the binned estimate is
//! evaluated on the grid by FFT convolution. [`direct_kde`] evaluates the plain
//! kernel sum and is kept for cross-checking the fast path.

mod estimate;
mod isj;

pub use estimate::{direct_kde, direct_kde_on_grid, fft_kde};
pub use isj::{isj_bandwidth, Bandwidth, BandwidthMethod};

use thiserror::Error;

/// Variance below which a sample is treated as a single point (m^2).
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Smallest grid the estimators accept.
pub const MIN_GRID_POINTS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KdeError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("samples are degenerate (variance {variance:e}); no bandwidth is defined")]
    Degenerate { variance: f64 },

    #[error("sample {0} is not finite")]
    NonFinite(f64),

    #[error("grid needs at least {MIN_GRID_POINTS} points, got {0}")]
    GridTooSmall(usize),

    #[error("grid range [{start}, {end}] is empty or not finite")]
    InvalidRange { start: f64, end: f64 },

    #[error("sample {value} lies outside the grid [{start}, {end}]")]
    OutOfRange { value: f64, start: f64, end: f64 },

    #[error("bandwidth must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
}

/// Equidistant evaluation grid `start = g_1 < ... < g_M = end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    start: f64,
    end: f64,
    points: usize,
}

impl GridSpec {
    pub fn new(start: f64, end: f64, points: usize) -> Result<Self, KdeError> {
        if points < MIN_GRID_POINTS {
            return Err(KdeError::GridTooSmall(points));
        }
        if !(start.is_finite() && end.is_finite() && start < end) {
            return Err(KdeError::InvalidRange { start, end });
        }
        Ok(Self { start, end, points })
    }

    #[inline]
    pub fn start(&self) -> f64 {
        self.start
    }

    #[inline]
    pub fn end(&self) -> f64 {
        self.end
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn range(&self) -> f64 {
        self.end - self.start
    }

    #[inline]
    pub fn step(&self) -> f64 {
        self.range() / (self.points - 1) as f64
    }

    /// Location of grid point `j`; the last point is exactly `end`.
    #[inline]
    pub fn point(&self, j: usize) -> f64 {
        if j + 1 == self.points {
            self.end
        } else {
            self.start + j as f64 * self.step()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(move |j| self.point(j))
    }
}

/// Fractional sample counts per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSample {
    grid: GridSpec,
    counts: Vec<f64>,
    sample_count: usize,
}

impl BinnedSample {
    /// Builds a binned sample from precomputed counts, e.g. for testing.
    pub fn from_counts(grid: GridSpec, counts: Vec<f64>, sample_count: usize) -> Self {
        assert_eq!(grid.len(), counts.len(), "one count per grid point");
        assert!(
            counts.iter().all(|c| *c >= 0.0),
            "counts must be non-negative"
        );
        Self {
            grid,
            counts,
            sample_count,
        }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    /// Number of original samples `m`.
    #[inline]
    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    /// Mean and variance of the binned distribution.
    pub fn moments(&self) -> (f64, f64) {
        let total: f64 = self.counts.iter().sum();
        if total <= 0.0 {
            return (f64::NAN, 0.0);
        }
        let mean = self
            .counts
            .iter()
            .enumerate()
            .map(|(j, c)| c * self.grid.point(j))
            .sum::<f64>()
            / total;
        let var = self
            .counts
            .iter()
            .enumerate()
            .map(|(j, c)| c * (self.grid.point(j) - mean).powi(2))
            .sum::<f64>()
            / total;
        (mean, var)
    }

    /// Interpolated quantile of the binned distribution, `q` in `[0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let total: f64 = self.counts.iter().sum();
        let target = q.clamp(0.0, 1.0) * total;
        let mut acc = 0.0;
        for (j, &c) in self.counts.iter().enumerate() {
            if c > 0.0 && acc + c >= target {
                if j == 0 {
                    return self.grid.point(0);
                }
                let frac = (target - acc) / c;
                return self.grid.point(j - 1) + frac * self.grid.step();
            }
            acc += c;
        }
        self.grid.end()
    }
}

/// Density values on a grid together with the bandwidth that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    grid: GridSpec,
    densities: Vec<f64>,
    bandwidth: f64,
}

impl DensityEstimate {
    pub fn new(grid: GridSpec, densities: Vec<f64>, bandwidth: f64) -> Self {
        assert_eq!(grid.len(), densities.len(), "one density per grid point");
        Self {
            grid,
            densities,
            bandwidth,
        }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    #[inline]
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn trapezoid_integral(&self) -> f64 {
        let d = &self.densities;
        let inner: f64 = d[1..d.len() - 1].iter().sum();
        self.grid.step() * (inner + 0.5 * (d[0] + d[d.len() - 1]))
    }

    /// Index of the first global maximum.
    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        for (j, &v) in self.densities.iter().enumerate() {
            if v > self.densities[best] {
                best = j;
            }
        }
        best
    }
}

fn check_finite(samples: &[f64]) -> Result<(), KdeError> {
    match samples.iter().find(|s| !s.is_finite()) {
        Some(&bad) => Err(KdeError::NonFinite(bad)),
        None => Ok(()),
    }
}

fn mean_variance(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}

fn silverman_rule(std: f64, iqr: f64, n: usize) -> f64 {
    let robust = iqr / 1.34;
    let spread = if robust > 0.0 { std.min(robust) } else { std };
    0.9 * spread * (n as f64).powf(-0.2)
}

/// Silverman's rule-of-thumb bandwidth, `0.9 min(sd, IQR/1.34) n^(-1/5)`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64, KdeError> {
    if samples.len() < 2 {
        return Err(KdeError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    check_finite(samples)?;
    let (_, var) = mean_variance(samples);
    if var < DEGENERATE_VARIANCE {
        return Err(KdeError::Degenerate { variance: var });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = sorted_quantile(&sorted, 0.75) - sorted_quantile(&sorted, 0.25);
    Ok(silverman_rule(var.sqrt(), iqr, samples.len()))
}

pub(crate) fn silverman_from_binned(binned: &BinnedSample) -> f64 {
    let (_, var) = binned.moments();
    let iqr = binned.quantile(0.75) - binned.quantile(0.25);
    silverman_rule(var.sqrt(), iqr, binned.sample_count().max(2))
}

fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Grid spanning the samples plus `padding_bandwidths` Silverman bandwidths per side.
pub fn make_grid(
    samples: &[f64],
    points: usize,
    padding_bandwidths: f64,
) -> Result<GridSpec, KdeError> {
    if points < MIN_GRID_POINTS {
        return Err(KdeError::GridTooSmall(points));
    }
    let pad = if padding_bandwidths > 0.0 {
        padding_bandwidths * silverman_bandwidth(samples)?
    } else {
        if samples.len() < 2 {
            return Err(KdeError::TooFewSamples {
                needed: 2,
                got: samples.len(),
            });
        }
        check_finite(samples)?;
        let (_, var) = mean_variance(samples);
        if var < DEGENERATE_VARIANCE {
            return Err(KdeError::Degenerate { variance: var });
        }
        0.0
    };
    grid_with_padding(samples, points, pad)
}

/// Grid spanning the samples plus an absolute padding in sample units.
pub fn grid_with_padding(samples: &[f64], points: usize, pad: f64) -> Result<GridSpec, KdeError> {
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    GridSpec::new(lo - pad, hi + pad, points)
}

/// Splits each sample's unit mass between its two bracketing grid points.
pub fn linear_binning(samples: &[f64], grid: &GridSpec) -> Result<BinnedSample, KdeError> {
    let m = grid.len();
    let step = grid.step();
    let mut counts = vec![0.0; m];
    for &s in samples {
        if !s.is_finite() {
            return Err(KdeError::NonFinite(s));
        }
        if s < grid.start() || s > grid.end() {
            return Err(KdeError::OutOfRange {
                value: s,
                start: grid.start(),
                end: grid.end(),
            });
        }
        let pos = (s - grid.start()) / step;
        let j = (pos.floor() as usize).min(m - 2);
        let frac = (pos - j as f64).clamp(0.0, 1.0);
        counts[j] += 1.0 - frac;
        counts[j + 1] += frac;
    }
    Ok(BinnedSample {
        grid: *grid,
        counts,
        sample_count: samples.len(),
    })
}
