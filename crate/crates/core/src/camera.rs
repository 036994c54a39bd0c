//! Pinhole intrinsics and rigid camera poses.

use nalgebra::{Matrix3, Point3, Vector3};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("rotation is not orthonormal with det +1 (error {0:e})")]
    NotARotation(f64),

    #[error("pose matrix must have a [0 0 0 1] bottom row")]
    NotRigid,

    #[error("depth must be positive and finite, got {0}")]
    InvalidDepth(f64),

    #[error("pixel ({u}, {v}) lies outside the {width}x{height} image")]
    PixelOutOfBounds {
        u: f64,
        v: f64,
        width: usize,
        height: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Raw depth units per meter.
    pub depth_scale: f64,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        depth_scale: f64,
    ) -> Result<Self, CameraError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            depth_scale,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let bad = |msg: &str| Err(CameraError::InvalidIntrinsics(msg.to_string()));
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return bad("focal lengths must be positive");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image dimensions must be positive");
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return bad("cx must lie inside the image");
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return bad("cy must lie inside the image");
        }
        if !(self.depth_scale > 0.0 && self.depth_scale.is_finite()) {
            return bad("depth_scale must be positive");
        }
        Ok(())
    }

    /// Pixel-center coordinates `(u, v)` that round to a valid pixel index.
    #[inline]
    pub fn in_bounds(&self, u: f64, v: f64) -> bool {
        u >= -0.5 && v >= -0.5 && u < self.width as f64 - 0.5 && v < self.height as f64 - 0.5
    }
}

/// Lifts pixel `(u, v)` at metric `depth` into the camera frame.
pub fn backproject(
    k: &CameraIntrinsics,
    u: f64,
    v: f64,
    depth: f64,
) -> Result<Point3<f64>, CameraError> {
    if !(depth > 0.0 && depth.is_finite()) {
        return Err(CameraError::InvalidDepth(depth));
    }
    if !k.in_bounds(u, v) {
        return Err(CameraError::PixelOutOfBounds {
            u,
            v,
            width: k.width,
            height: k.height,
        });
    }
    Ok(Point3::new(
        (u - k.cx) * depth / k.fx,
        (v - k.cy) * depth / k.fy,
        depth,
    ))
}

/// Projects a camera-frame point; `None` when it is behind the camera or outside the image.
#[inline]
pub fn project_point(k: &CameraIntrinsics, p: &Point3<f64>) -> Option<(f64, f64)> {
    if !(p.z > 0.0) {
        return None;
    }
    let u = k.fx * p.x / p.z + k.cx;
    let v = k.fy * p.y / p.z + k.cy;
    k.in_bounds(u, v).then_some((u, v))
}

/// Rigid camera-to-world transform `p_world = R p_cam + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

const ROTATION_TOLERANCE: f64 = 1e-6;

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, CameraError> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        let det = (rotation.determinant() - 1.0).abs();
        let err = ortho.max(det);
        if !(err <= ROTATION_TOLERANCE) || !translation.iter().all(|t| t.is_finite()) {
            return Err(CameraError::NotARotation(err));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Parses a row-major 4x4 homogeneous matrix.
    pub fn from_rows(m: &[f64; 16]) -> Result<Self, CameraError> {
        let bottom = [m[12], m[13], m[14], m[15]];
        if bottom
            .iter()
            .zip([0.0, 0.0, 0.0, 1.0])
            .any(|(a, b)| (a - b).abs() > ROTATION_TOLERANCE)
        {
            return Err(CameraError::NotRigid);
        }
        let r = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        Self::new(r, Vector3::new(m[3], m[7], m[11]))
    }

    pub fn to_rows(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }

    /// Camera at `eye` looking at `target`, image `-y` axis toward `up`.
    /// Camera frame: x right, y down, z forward.
    pub fn look_at(
        eye: Point3<f64>,
        target: Point3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self, CameraError> {
        let z = (target - eye).normalize();
        let x = z.cross(&up);
        if x.norm() < 1e-9 || !z.iter().all(|c| c.is_finite()) {
            return Err(CameraError::NotARotation(f64::NAN));
        }
        let x = x.normalize();
        let y = z.cross(&x);
        Self::new(Matrix3::from_columns(&[x, y, z]), eye.coords)
    }

    #[inline]
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    #[inline]
    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera frame to world frame.
    #[inline]
    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// World frame to camera frame.
    #[inline]
    pub fn inverse_transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.transpose() * (p.coords - self.translation))
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(self.translation)
    }
}
