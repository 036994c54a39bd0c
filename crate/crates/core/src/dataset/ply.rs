use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::DatasetError;
use crate::tsdf::SurfacePoint;

/// Which label field selects a point's color.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColorMode {
    #[default]
    Instance,
    Class,
}

impl std::str::FromStr for ColorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "instance" => Ok(Self::Instance),
            "class" => Ok(Self::Class),
            other => Err(format!(
                "unknown color mode {other:?} (expected instance or class)"
            )),
        }
    }
}

const UNLABELED: [u8; 3] = [128, 128, 128];

/// Deterministic color for a label id. Hues step by the golden-ratio conjugate;
/// saturation and value cycle through three levels. Id 0 is gray.
pub fn palette_color(id: u32) -> [u8; 3] {
    if id == 0 {
        return UNLABELED;
    }
    const PHI_CONJ: f64 = 0.618_033_988_749_895;
    let hue = (f64::from(id) * PHI_CONJ).fract();
    let level = (id % 3) as f64;
    let s = 0.95 - 0.2 * level;
    let v = 0.95 - 0.15 * ((id / 3) % 3) as f64;
    hsv_to_rgb(hue, s, v)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h6 = h * 6.0;
    let sector = h6.floor() as i32 % 6;
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r, g, b].map(|c| (c * 255.0).round().clamp(0.0, 255.0) as u8)
}

fn point_color(p: &SurfacePoint, mode: ColorMode) -> [u8; 3] {
    match (p.label, mode) {
        (None, _) => UNLABELED,
        (Some(l), ColorMode::Instance) => palette_color(l.instance_id),
        (Some(l), ColorMode::Class) => palette_color(u32::from(l.class_id)),
    }
}

/// Binary little-endian PLY with `float x,y,z` and `uchar red,green,blue` per vertex.
pub fn write_ply<W: Write>(
    points: &[SurfacePoint],
    mode: ColorMode,
    mut w: W,
) -> std::io::Result<()> {
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        points.len()
    )?;
    for p in points {
        for c in p.position.iter() {
            w.write_all(&(*c as f32).to_le_bytes())?;
        }
        w.write_all(&point_color(p, mode))?;
    }
    w.flush()
}

pub fn export_ply(
    points: &[SurfacePoint],
    path: &Path,
    mode: ColorMode,
) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    write_ply(points, mode, BufWriter::new(file)).map_err(|e| DatasetError::io(path, e))
}
