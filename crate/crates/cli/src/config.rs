//! Run settings merged from built-in defaults, a `key=value` file and flags,
//! in that order of precedence.

use std::path::Path;

use anyhow::{bail, Context, Result};
use pmr_core::dataset::ColorMode;
use pmr_core::tsdf::WeightMode;
use pmr_core::{HoleFillConfig, PanopticVoxelMap, PipelineConfig, RefineConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub voxel_size: f64,
    pub truncation: f64,
    pub grid_points: usize,
    pub padding_bandwidths: f64,
    pub density_threshold: f64,
    pub min_samples: usize,
    pub hole_kernel_size: usize,
    pub hole_sigma: f64,
    pub refine: bool,
    pub weight_mode: WeightMode,
    pub color_by: ColorMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            voxel_size: p.voxel_size,
            truncation: p.truncation,
            grid_points: p.refine.grid_points,
            padding_bandwidths: p.refine.padding_bandwidths,
            density_threshold: p.refine.density_threshold,
            min_samples: p.refine.min_samples,
            hole_kernel_size: p.hole_fill.kernel_size,
            hole_sigma: p.hole_fill.sigma,
            refine: p.refine_enabled,
            weight_mode: p.integration.weight_mode,
            color_by: ColorMode::Instance,
        }
    }
}

fn parse_bool(v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => bail!("expected a boolean, got {v:?}"),
    }
}

pub fn parse_weight_mode(v: &str) -> Result<WeightMode, String> {
    match v {
        "constant" => Ok(WeightMode::Constant),
        "inverse-square" => Ok(WeightMode::InverseSquare),
        _ => Err(format!(
            "unknown weight mode {v:?} (expected constant or inverse-square)"
        )),
    }
}

impl RunConfig {
    /// Sets one key. Keys match the field names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .ok()
                .with_context(|| format!("bad value for {key}: {v:?}"))
        }
        match key {
            "voxel_size" => self.voxel_size = num(key, value)?,
            "truncation" => self.truncation = num(key, value)?,
            "grid_points" => self.grid_points = num(key, value)?,
            "padding_bandwidths" => self.padding_bandwidths = num(key, value)?,
            "density_threshold" => self.density_threshold = num(key, value)?,
            "min_samples" => self.min_samples = num(key, value)?,
            "hole_kernel_size" => self.hole_kernel_size = num(key, value)?,
            "hole_sigma" => self.hole_sigma = num(key, value)?,
            "refine" => {
                self.refine = parse_bool(value).with_context(|| format!("bad value for {key}"))?
            }
            "weight_mode" => {
                self.weight_mode = parse_weight_mode(value).map_err(anyhow::Error::msg)?
            }
            "color_by" => self.color_by = value.parse().map_err(anyhow::Error::msg)?,
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    /// Applies every `key=value` line of `text`. Blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key=value", n + 1))?;
            self.set(k.trim(), v.trim())
                .with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text)
            .with_context(|| format!("config {}", path.display()))
    }

    /// Checks every value against the preconditions of the stage that uses it.
    pub fn validate(&self) -> Result<()> {
        self.hole_fill().validate()?;
        PanopticVoxelMap::new(self.voxel_size, self.truncation, [0.0; 3])?;
        if self.grid_points < 16 {
            bail!("grid_points must be at least 16, got {}", self.grid_points);
        }
        if !(self.density_threshold > 0.0 && self.density_threshold.is_finite()) {
            bail!(
                "density_threshold must be positive, got {}",
                self.density_threshold
            );
        }
        if !(self.padding_bandwidths >= 0.0 && self.padding_bandwidths.is_finite()) {
            bail!(
                "padding_bandwidths must be >= 0, got {}",
                self.padding_bandwidths
            );
        }
        Ok(())
    }

    fn hole_fill(&self) -> HoleFillConfig {
        HoleFillConfig {
            kernel_size: self.hole_kernel_size,
            sigma: self.hole_sigma,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let mut p = PipelineConfig {
            hole_fill: self.hole_fill(),
            refine: RefineConfig {
                grid_points: self.grid_points,
                padding_bandwidths: self.padding_bandwidths,
                density_threshold: self.density_threshold,
                min_samples: self.min_samples,
                ..RefineConfig::default()
            },
            refine_enabled: self.refine,
            voxel_size: self.voxel_size,
            truncation: self.truncation,
            ..PipelineConfig::default()
        };
        p.integration.weight_mode = self.weight_mode;
        p
    }
}
