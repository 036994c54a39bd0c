//! Dense metric depth maps and hole filling by normalized Gaussian convolution.

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DepthError {
    #[error("depth map dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },

    #[error("expected {expected} depth values for the given dimensions, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("depth value {value} at index {index} is negative or not finite")]
    InvalidValue { index: usize, value: f32 },

    #[error("kernel size must be odd and positive, got {0}")]
    InvalidKernelSize(usize),

    #[error("kernel sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
}

/// Per-pixel depth in meters, row-major. A value of `0.0` marks a missing measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self, DepthError> {
        if width == 0 || height == 0 {
            return Err(DepthError::EmptyDimensions { width, height });
        }
        if values.len() != width * height {
            return Err(DepthError::LengthMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(DepthError::InvalidValue { index, value });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self, DepthError> {
        Self::new(width, height, vec![0.0; width * height])
    }

    /// Decodes raw sensor units, `depth_m = raw / depth_scale`.
    pub fn from_raw_u16(
        width: usize,
        height: usize,
        raw: &[u16],
        depth_scale: f64,
    ) -> Result<Self, DepthError> {
        let values = raw
            .iter()
            .map(|&r| (f64::from(r) / depth_scale) as f32)
            .collect();
        Self::new(width, height, values)
    }

    /// Quantizes to sensor units. Depths beyond the u16 range are stored as missing.
    pub fn to_raw_u16(&self, depth_scale: f64) -> Vec<u16> {
        self.values
            .iter()
            .map(|&d| {
                let q = (f64::from(d) * depth_scale).round();
                if q >= 1.0 && q <= f64::from(u16::MAX) {
                    q as u16
                } else {
                    0
                }
            })
            .collect()
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
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, depth: f32) {
        assert!(depth.is_finite() && depth >= 0.0, "invalid depth {depth}");
        self.values[y * self.width + x] = depth;
    }

    pub fn zero_count(&self) -> usize {
        self.values.iter().filter(|&&d| d == 0.0).count()
    }
}

/// Window size and spread of the hole-filling kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoleFillConfig {
    /// Odd window edge length in pixels, at least 3.
    pub kernel_size: usize,
    /// Gaussian standard deviation in pixels.
    pub sigma: f64,
}

impl Default for HoleFillConfig {
    fn default() -> Self {
        Self {
            kernel_size: 5,
            sigma: 1.0,
        }
    }
}

impl HoleFillConfig {
    pub fn new(kernel_size: usize, sigma: f64) -> Result<Self, DepthError> {
        let cfg = Self { kernel_size, sigma };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DepthError> {
        if self.kernel_size < 3 || self.kernel_size.is_multiple_of(2) {
            return Err(DepthError::InvalidKernelSize(self.kernel_size));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(DepthError::InvalidSigma(self.sigma));
        }
        Ok(())
    }
}

/// Normalized `size x size` Gaussian weights, row-major, centered on the middle element.
///
/// An infinite `sigma` yields the flat box kernel.
pub fn gaussian_kernel_2d(size: usize, sigma: f64) -> Result<Vec<f64>, DepthError> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(DepthError::InvalidKernelSize(size));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(DepthError::InvalidSigma(sigma));
    }
    let half = (size / 2) as f64;
    let two_var = 2.0 * sigma * sigma;
    let mut weights: Vec<f64> = (0..size * size)
        .map(|i| {
            let u = (i % size) as f64 - half;
            let v = (i / size) as f64 - half;
            (-(u * u + v * v) / two_var).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(weights)
}

/// Fills missing pixels with the Gaussian-weighted mean of their valid neighbours.
///
/// Weights are renormalized over the non-zero pixels of the clipped window, so a
/// filled value is a convex combination of observed depths. Only input values are
/// read. Pixels with no valid neighbour stay at zero and valid pixels are copied
/// through untouched.
pub fn fill_holes(depth: &DepthMap, cfg: &HoleFillConfig) -> Result<DepthMap, DepthError> {
    cfg.validate()?;
    let kernel = gaussian_kernel_2d(cfg.kernel_size, cfg.sigma)?;
    let size = cfg.kernel_size;
    let half = size / 2;
    let (w, h) = (depth.width, depth.height);
    let src = &depth.values;

    let mut out = src.clone();
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, px) in row.iter_mut().enumerate() {
            if *px != 0.0 {
                continue;
            }
            let y0 = y.saturating_sub(half);
            let y1 = (y + half).min(h - 1);
            let x0 = x.saturating_sub(half);
            let x1 = (x + half).min(w - 1);
            let mut acc = 0.0f64;
            let mut norm = 0.0f64;
            for ny in y0..=y1 {
                let krow = (ny + half - y) * size;
                for nx in x0..=x1 {
                    let d = src[ny * w + nx];
                    if d > 0.0 {
                        let k = kernel[krow + nx + half - x];
                        acc += k * f64::from(d);
                        norm += k;
                    }
                }
            }
            if norm > 0.0 {
                *px = (acc / norm) as f32;
            }
        }
    });

    Ok(DepthMap {
        width: w,
        height: h,
        values: out,
    })
}
