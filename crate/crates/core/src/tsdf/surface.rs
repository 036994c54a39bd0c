use nalgebra::Point3;

use super::{voxel_label, PanopticVoxelMap, TsdfError};
use crate::refine::PanopticLabel;

#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePoint {
    pub position: Point3<f64>,
    pub label: Option<PanopticLabel>,
    pub weight: f32,
}

/// Centers of observed voxels with `|D| < band`, in ascending voxel order.
pub fn extract_surface_points(
    map: &PanopticVoxelMap,
    band: f64,
) -> Result<Vec<SurfacePoint>, TsdfError> {
    if !(band > 0.0) {
        return Err(TsdfError::InvalidBand(band));
    }
    Ok(map
        .voxels()
        .into_iter()
        .filter(|(_, v)| f64::from(v.tsdf).abs() < band)
        .map(|(idx, v)| SurfacePoint {
            position: map.voxel_center(idx),
            label: voxel_label(v),
            weight: v.weight,
        })
        .collect())
}

/// Sign changes of the distance field between observed axis neighbours,
/// located by linear interpolation. Pairs where both samples sit at the
/// truncation limit are ignored.
pub fn zero_crossings(map: &PanopticVoxelMap) -> Vec<Point3<f64>> {
    let tau = map.truncation() as f32;
    let mut out = Vec::new();
    for (idx, v) in map.voxels() {
        for axis in 0..3 {
            let mut next = idx;
            next[axis] += 1;
            let Some(n) = map.get(next) else { continue };
            let (a, b) = (v.tsdf, n.tsdf);
            if (a > 0.0) == (b > 0.0) || a == b || (a.abs() >= tau && b.abs() >= tau) {
                continue;
            }
            let t = f64::from(a / (a - b));
            let p0 = map.voxel_center(idx);
            let p1 = map.voxel_center(next);
            out.push(p0 + (p1 - p0) * t);
        }
    }
    out
}
