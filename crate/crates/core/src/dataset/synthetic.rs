//! Ray-cast analytic scenes written in the sequence layout.
//!
//! Ground-truth masks are exact. Predicted masks are the ground truth of every
//! thing segment, dilated and then leaked into nearby non-thing pixels.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use image::RgbImage;
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::sequence::format_pose;
use super::{create_dir, frame_file, write_u16_png, ClassInfo, DatasetError, SequenceManifest};
use crate::camera::{CameraIntrinsics, Pose};
use crate::depth::DepthMap;
use crate::refine::PanopticLabel;

const HIT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Plane,
    Sphere,
    BoxesRoom,
}

impl std::str::FromStr for SceneKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plane" => Ok(Self::Plane),
            "sphere" => Ok(Self::Sphere),
            "boxes-room" => Ok(Self::BoxesRoom),
            other => Err(format!(
                "unknown scene {other:?} (expected plane, sphere or boxes-room)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    /// Infinite plane through `point`.
    Plane {
        point: Point3<f64>,
        normal: Vector3<f64>,
    },
    Sphere {
        center: Point3<f64>,
        radius: f64,
    },
    /// Axis-aligned box. Seen from inside, its far faces are hit.
    Box {
        min: Point3<f64>,
        max: Point3<f64>,
    },
}

impl Primitive {
    /// Smallest `t > 0` with `origin + t * dir` on the surface.
    fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match *self {
            Primitive::Plane { point, normal } => {
                let denom = normal.dot(dir);
                if denom.abs() < 1e-15 {
                    return None;
                }
                let t = normal.dot(&(point - origin)) / denom;
                (t > HIT_EPSILON).then_some(t)
            }
            Primitive::Sphere { center, radius } => {
                let oc = origin - center;
                let a = dir.norm_squared();
                let b = oc.dot(dir);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                [(-b - sq) / a, (-b + sq) / a]
                    .into_iter()
                    .find(|t| *t > HIT_EPSILON)
            }
            Primitive::Box { min, max } => {
                let mut near = f64::NEG_INFINITY;
                let mut far = f64::INFINITY;
                for a in 0..3 {
                    if dir[a].abs() < 1e-15 {
                        if origin[a] < min[a] || origin[a] > max[a] {
                            return None;
                        }
                        continue;
                    }
                    let t1 = (min[a] - origin[a]) / dir[a];
                    let t2 = (max[a] - origin[a]) / dir[a];
                    near = near.max(t1.min(t2));
                    far = far.min(t1.max(t2));
                }
                if near > far || far <= HIT_EPSILON {
                    None
                } else if near > HIT_EPSILON {
                    Some(near)
                } else {
                    Some(far)
                }
            }
        }
    }
}

/// A primitive carrying its segment label. `label.instance_id` is the id written to mask images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneObject {
    pub shape: Primitive,
    pub label: PanopticLabel,
    pub color: [u8; 3],
}

/// Sensor and annotation corruption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Gaussian depth noise, meters.
    pub depth_sigma: f64,
    /// Per-pixel probability of a zero (missing) depth reading.
    pub hole_probability: f64,
    /// Per-pixel probability that a non-thing pixel near a thing mask joins that mask.
    pub leak_probability: f64,
    /// Chebyshev pixel distance from the mask within which leaks occur.
    pub leak_radius: usize,
    /// Square dilation radius applied to predicted thing masks before leaking.
    pub dilation: usize,
}

impl NoiseModel {
    pub const fn none() -> Self {
        Self {
            depth_sigma: 0.0,
            hole_probability: 0.0,
            leak_probability: 0.0,
            leak_radius: 8,
            dilation: 0,
        }
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidScene(m));
        if !(self.depth_sigma >= 0.0 && self.depth_sigma.is_finite()) {
            return bad(format!(
                "depth_sigma must be >= 0, got {}",
                self.depth_sigma
            ));
        }
        for (name, p) in [
            ("hole_probability", self.hole_probability),
            ("leak_probability", self.leak_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        Ok(())
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneSpec {
    pub kind: SceneKind,
    pub intrinsics: CameraIntrinsics,
    /// On equal hit distance the earlier object wins.
    pub objects: Vec<SceneObject>,
    pub classes: BTreeMap<u16, ClassInfo>,
    /// Camera-to-world pose of every frame.
    pub trajectory: Vec<Pose>,
    pub noise: NoiseModel,
    pub seed: u64,
}

fn class(name: &str, is_thing: bool) -> ClassInfo {
    ClassInfo {
        name: name.to_string(),
        is_thing,
    }
}

impl SyntheticSceneSpec {
    /// 640x480 camera with a 525 px focal length and millimeter depth.
    pub fn default_intrinsics() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 525.0,
            fy: 525.0,
            cx: 319.5,
            cy: 239.5,
            width: 640,
            height: 480,
            depth_scale: 1000.0,
        }
    }

    /// Built-in scene with `frames` views on a closed trajectory.
    ///
    /// * `Plane`: the plane `z = 2` seen from near the origin.
    /// * `Sphere`: unit sphere at the origin from an orbit of radius 3.
    /// * `BoxesRoom`: boxes and balls on pedestals in a 6 x 5 x 2.8 m room,
    ///   with mask-leak corruption enabled.
    pub fn preset(kind: SceneKind, frames: usize, seed: u64) -> Self {
        let n = frames.max(1) as f64;
        let angle = |i: usize| TAU * i as f64 / n;
        let mut classes = BTreeMap::new();
        let mut objects = Vec::new();
        let mut noise = NoiseModel::none();
        let trajectory: Vec<Pose>;

        match kind {
            SceneKind::Plane => {
                classes.insert(1, class("plane", false));
                objects.push(SceneObject {
                    shape: Primitive::Plane {
                        point: Point3::new(0.0, 0.0, 2.0),
                        normal: Vector3::z(),
                    },
                    label: PanopticLabel::new(1, 1),
                    color: [180, 170, 150],
                });
                trajectory = (0..frames)
                    .map(|i| {
                        let a = angle(i);
                        let eye = Point3::new(0.4 * a.cos(), 0.3 * a.sin(), 0.1 * (2.0 * a).sin());
                        let target = Point3::new(0.2 * a.sin(), 0.2 * a.cos(), 2.0);
                        Pose::look_at(eye, target, -Vector3::y()).expect("plane trajectory")
                    })
                    .collect();
            }
            SceneKind::Sphere => {
                classes.insert(1, class("sphere", true));
                objects.push(SceneObject {
                    shape: Primitive::Sphere {
                        center: Point3::origin(),
                        radius: 1.0,
                    },
                    label: PanopticLabel::new(1, 1),
                    color: [200, 60, 60],
                });
                trajectory = (0..frames)
                    .map(|i| {
                        let a = angle(i);
                        let elev = 0.35 * (3.0 * a).sin();
                        let eye = Point3::new(
                            3.0 * a.cos() * elev.cos(),
                            3.0 * a.sin() * elev.cos(),
                            3.0 * elev.sin(),
                        );
                        Pose::look_at(eye, Point3::origin(), Vector3::z())
                            .expect("sphere trajectory")
                    })
                    .collect();
            }
            SceneKind::BoxesRoom => {
                classes.insert(1, class("wall", false));
                classes.insert(2, class("floor", false));
                classes.insert(3, class("pedestal", false));
                classes.insert(10, class("box", true));
                classes.insert(11, class("ball", true));
                objects.push(SceneObject {
                    shape: Primitive::Plane {
                        point: Point3::origin(),
                        normal: Vector3::z(),
                    },
                    label: PanopticLabel::new(2, 2),
                    color: [120, 100, 80],
                });
                objects.push(SceneObject {
                    shape: Primitive::Box {
                        min: Point3::new(-3.0, -2.5, -0.1),
                        max: Point3::new(3.0, 2.5, 2.8),
                    },
                    label: PanopticLabel::new(1, 1),
                    color: [210, 210, 200],
                });
                const PEDESTALS: usize = 5;
                const TOP: f64 = 0.7;
                for p in 0..PEDESTALS {
                    let a = TAU * p as f64 / PEDESTALS as f64 + 0.3;
                    let (x, y) = (1.2 * a.cos(), 1.2 * a.sin());
                    objects.push(SceneObject {
                        shape: Primitive::Box {
                            min: Point3::new(x - 0.2, y - 0.2, 0.0),
                            max: Point3::new(x + 0.2, y + 0.2, TOP),
                        },
                        label: PanopticLabel::new(3, 3 + p as u32),
                        color: [90, 90, 110],
                    });
                    let id = 10 + p as u32;
                    let thing = if p % 2 == 0 {
                        let half = 0.12 + 0.02 * p as f64;
                        SceneObject {
                            shape: Primitive::Box {
                                min: Point3::new(x - half, y - half, TOP),
                                max: Point3::new(x + half, y + half, TOP + 2.0 * half),
                            },
                            label: PanopticLabel::new(10, id),
                            color: [40 + 40 * p as u8, 160, 60],
                        }
                    } else {
                        let r = 0.15;
                        SceneObject {
                            shape: Primitive::Sphere {
                                center: Point3::new(x, y, TOP + r),
                                radius: r,
                            },
                            label: PanopticLabel::new(11, id),
                            color: [60, 80, 120 + 30 * p as u8],
                        }
                    };
                    objects.push(thing);
                }
                trajectory = (0..frames)
                    .map(|i| {
                        let a = angle(i);
                        let eye = Point3::new(2.2 * a.cos(), 2.2 * a.sin(), 1.5);
                        Pose::look_at(eye, Point3::new(0.0, 0.0, 0.8), Vector3::z())
                            .expect("room trajectory")
                    })
                    .collect();
                noise = NoiseModel {
                    depth_sigma: 0.002,
                    hole_probability: 0.01,
                    leak_probability: 0.4,
                    leak_radius: 8,
                    dilation: 1,
                };
            }
        }

        Self {
            kind,
            intrinsics: Self::default_intrinsics(),
            objects,
            classes,
            trajectory,
            noise,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidScene(m));
        self.intrinsics
            .validate()
            .map_err(|e| DatasetError::InvalidScene(e.to_string()))?;
        if self.trajectory.is_empty() {
            return bad("trajectory needs at least one pose".into());
        }
        self.noise.validate()?;
        let mut seen = BTreeMap::new();
        for o in &self.objects {
            let id = o.label.instance_id;
            if id == 0 || id > u32::from(u16::MAX) {
                return bad(format!("segment id {id} outside 1..=65535"));
            }
            if !self.classes.contains_key(&o.label.class_id) {
                return bad(format!(
                    "object {id} has unknown class {}",
                    o.label.class_id
                ));
            }
            if let Some(prev) = seen.insert(id, o.label.class_id) {
                if prev != o.label.class_id {
                    return bad(format!("segment id {id} used with two classes"));
                }
            }
        }
        Ok(())
    }

    fn is_thing(&self, segment_id: u16) -> bool {
        self.objects
            .iter()
            .find(|o| o.label.instance_id == u32::from(segment_id))
            .is_some_and(|o| {
                self.classes
                    .get(&o.label.class_id)
                    .is_some_and(|c| c.is_thing)
            })
    }
}

/// Noise-free render of one view.
#[derive(Debug, Clone)]
pub struct RenderedView {
    /// Metric depth along the optical axis; 0 where no surface is hit.
    pub depth: DepthMap,
    /// Segment id per pixel; 0 where no surface is hit.
    pub ids: Vec<u16>,
    pub rgb: Vec<[u8; 3]>,
}

/// Ray-casts every pixel center. The ray direction has unit camera-z, so the hit
/// parameter is the depth.
pub fn render_view(spec: &SyntheticSceneSpec, pose: &Pose) -> RenderedView {
    let k = &spec.intrinsics;
    let origin = pose.center();
    let rot = *pose.rotation();
    let rows: Vec<Vec<(f32, u16, [u8; 3])>> = (0..k.height)
        .into_par_iter()
        .map(|v| {
            (0..k.width)
                .map(|u| {
                    let cam = Vector3::new((u as f64 - k.cx) / k.fx, (v as f64 - k.cy) / k.fy, 1.0);
                    let dir = rot * cam;
                    let mut best: Option<(f64, &SceneObject)> = None;
                    for o in &spec.objects {
                        if let Some(t) = o.shape.intersect(&origin, &dir) {
                            if best.is_none_or(|(bt, _)| t < bt) {
                                best = Some((t, o));
                            }
                        }
                    }
                    match best {
                        Some((t, o)) => (t as f32, o.label.instance_id as u16, o.color),
                        None => (0.0, 0, [0, 0, 0]),
                    }
                })
                .collect()
        })
        .collect();
    let n = k.width * k.height;
    let mut depth = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    let mut rgb = Vec::with_capacity(n);
    for (d, id, c) in rows.into_iter().flatten() {
        depth.push(d);
        ids.push(id);
        rgb.push(c);
    }
    RenderedView {
        depth: DepthMap::new(k.width, k.height, depth).expect("rendered depth is finite"),
        ids,
        rgb,
    }
}

/// Square (Chebyshev) dilation by `r` pixels, separable.
pub(crate) fn dilate(bits: &[bool], w: usize, h: usize, r: usize) -> Vec<bool> {
    if r == 0 {
        return bits.to_vec();
    }
    let mut horiz = vec![false; bits.len()];
    for y in 0..h {
        let row = &bits[y * w..(y + 1) * w];
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            horiz[y * w + x] = row[lo..=hi].iter().any(|b| *b);
        }
    }
    let mut out = vec![false; bits.len()];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).any(|yy| horiz[yy * w + x]);
        }
    }
    out
}

/// Frame-local RNG; `purpose` separates independent noise sources.
fn frame_rng(seed: u64, frame: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame as u64 * 4 + purpose);
    rng
}

/// Predicted segment ids: thing masks are dilated and leaked, later ids win overlaps.
/// One uniform draw is made per candidate pixel, so a larger leak probability
/// yields a superset of leaked pixels under the same seed.
pub(crate) fn corrupt_ids(
    spec: &SyntheticSceneSpec,
    ids: &[u16],
    rng: &mut ChaCha8Rng,
) -> Vec<u16> {
    let k = &spec.intrinsics;
    let (w, h) = (k.width, k.height);
    let noise = &spec.noise;
    let mut present: Vec<u16> = ids.iter().copied().filter(|&i| i != 0).collect();
    present.sort_unstable();
    present.dedup();
    let things: Vec<u16> = present.into_iter().filter(|&i| spec.is_thing(i)).collect();
    let any_thing: Vec<bool> = ids
        .iter()
        .map(|&i| i != 0 && things.binary_search(&i).is_ok())
        .collect();

    let mut pred = ids.to_vec();
    for &id in &things {
        let gt: Vec<bool> = ids.iter().map(|&i| i == id).collect();
        let grown = dilate(&gt, w, h, noise.dilation);
        let reach = dilate(&grown, w, h, noise.leak_radius);
        for i in 0..ids.len() {
            let leak = if reach[i] && !grown[i] && !any_thing[i] && ids[i] != 0 {
                rng.random::<f64>() < noise.leak_probability
            } else {
                false
            };
            if grown[i] || leak {
                pred[i] = id;
            }
        }
    }
    pred
}

fn write_rgb(path: &Path, k: &CameraIntrinsics, rgb: &[[u8; 3]]) -> Result<(), DatasetError> {
    let img = RgbImage::from_raw(
        k.width as u32,
        k.height as u32,
        rgb.iter().flatten().copied().collect(),
    )
    .ok_or_else(|| DatasetError::format(path, "rgb size mismatch"))?;
    img.save(path).map_err(|source| DatasetError::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Renders every pose of the trajectory and writes a complete sequence directory.
pub fn generate_synthetic(
    spec: &SyntheticSceneSpec,
    out: &Path,
) -> Result<SequenceManifest, DatasetError> {
    spec.validate()?;
    for dir in ["", "rgb", "depth", "mask", "gt_mask", "pose"] {
        create_dir(&out.join(dir))?;
    }
    let manifest = SequenceManifest {
        root: out.to_path_buf(),
        frame_count: spec.trajectory.len(),
        intrinsics: spec.intrinsics,
        classes: spec.classes.clone(),
        instances: spec
            .objects
            .iter()
            .map(|o| (o.label.instance_id, o.label.class_id))
            .collect(),
    };
    manifest.save()?;

    let k = &spec.intrinsics;
    let noise = &spec.noise;
    for (index, pose) in spec.trajectory.iter().enumerate() {
        let view = render_view(spec, pose);

        let mut depth = view.depth.values().to_vec();
        if noise.depth_sigma > 0.0 {
            let normal = Normal::new(0.0, noise.depth_sigma).expect("validated sigma");
            let mut rng = frame_rng(spec.seed, index, 0);
            for d in depth.iter_mut().filter(|d| **d > 0.0) {
                *d = (f64::from(*d) + normal.sample(&mut rng)).max(0.0) as f32;
            }
        }
        if noise.hole_probability > 0.0 {
            let mut rng = frame_rng(spec.seed, index, 1);
            for d in depth.iter_mut() {
                if rng.random::<f64>() < noise.hole_probability {
                    *d = 0.0;
                }
            }
        }
        let depth = DepthMap::new(k.width, k.height, depth).expect("noisy depth is finite");
        let pred = corrupt_ids(spec, &view.ids, &mut frame_rng(spec.seed, index, 2));

        write_u16_png(
            &manifest.depth_path(index),
            k.width,
            k.height,
            depth.to_raw_u16(k.depth_scale),
        )?;
        write_u16_png(&manifest.gt_mask_path(index), k.width, k.height, view.ids)?;
        write_u16_png(&manifest.mask_path(index), k.width, k.height, pred)?;
        write_rgb(&manifest.rgb_path(index), k, &view.rgb)?;
        let pose_path = frame_file(out, "pose", index, "txt");
        std::fs::write(&pose_path, format_pose(pose))
            .map_err(|e| DatasetError::io(&pose_path, e))?;
        log::debug!("wrote synthetic frame {index}");
    }
    Ok(manifest)
}
