use std::path::Path;

use image::ImageReader;

use super::{read_mask_image, read_u16_png, DatasetError, SequenceManifest};
use crate::camera::Pose;
use crate::depth::DepthMap;
use crate::refine::InstanceMask;

/// One decoded frame of a sequence.
#[derive(Debug, Clone)]
pub struct Frame {
    pub index: usize,
    pub depth: DepthMap,
    /// Predicted segmentation, one mask per segment id.
    pub masks: Vec<InstanceMask>,
    pub gt_masks: Option<Vec<InstanceMask>>,
    pub pose: Pose,
    pub rgb: Option<Vec<[u8; 3]>>,
}

/// Opens a sequence directory. Frames are decoded lazily, in index order.
pub fn load_sequence(root: &Path) -> Result<SequenceReader, DatasetError> {
    let manifest = SequenceManifest::load(root)?;
    for dir in ["depth", "mask", "pose"] {
        let p = root.join(dir);
        if manifest.frame_count > 0 && !p.is_dir() {
            return Err(DatasetError::format(&p, "directory is missing"));
        }
    }
    Ok(SequenceReader { manifest, next: 0 })
}

#[derive(Debug, Clone)]
pub struct SequenceReader {
    manifest: SequenceManifest,
    next: usize,
}

impl SequenceReader {
    pub fn manifest(&self) -> &SequenceManifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.manifest.frame_count
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.frame_count == 0
    }

    /// Restarts iteration from frame 0.
    pub fn rewind(&mut self) {
        self.next = 0;
    }

    pub fn read_frame(&self, index: usize) -> Result<Frame, DatasetError> {
        let m = &self.manifest;
        let k = &m.intrinsics;

        let depth_path = m.depth_path(index);
        let (w, h, raw) = read_u16_png(&depth_path).map_err(|e| e.in_frame(index))?;
        if (w, h) != (k.width, k.height) {
            return Err(DatasetError::Frame {
                index,
                path: depth_path,
                message: format!("depth is {w}x{h}, expected {}x{}", k.width, k.height),
            });
        }
        let depth =
            DepthMap::from_raw_u16(w, h, &raw, k.depth_scale).map_err(|e| DatasetError::Frame {
                index,
                path: depth_path.clone(),
                message: e.to_string(),
            })?;

        let masks = read_mask_image(&m.mask_path(index), m).map_err(|e| e.in_frame(index))?;
        let gt_masks = if m.has_ground_truth() {
            Some(read_mask_image(&m.gt_mask_path(index), m).map_err(|e| e.in_frame(index))?)
        } else {
            None
        };
        let pose = read_pose(&m.pose_path(index)).map_err(|e| e.in_frame(index))?;
        let rgb = read_rgb(&m.rgb_path(index), k.width, k.height).map_err(|e| e.in_frame(index))?;

        Ok(Frame {
            index,
            depth,
            masks,
            gt_masks,
            pose,
            rgb,
        })
    }
}

impl Iterator for SequenceReader {
    type Item = Result<Frame, DatasetError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.manifest.frame_count {
            return None;
        }
        let index = self.next;
        self.next += 1;
        Some(self.read_frame(index))
    }
}

pub(crate) fn read_pose(path: &Path) -> Result<Pose, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| DatasetError::format(path, format!("bad number {t:?}")))
        })
        .collect::<Result<_, _>>()?;
    let rows: [f64; 16] = values.try_into().map_err(|v: Vec<f64>| {
        DatasetError::format(path, format!("expected 16 values, got {}", v.len()))
    })?;
    Pose::from_rows(&rows).map_err(|e| DatasetError::format(path, e.to_string()))
}

pub(crate) fn format_pose(pose: &Pose) -> String {
    pose.to_rows()
        .chunks(4)
        .map(|row| row.iter().map(f64::to_string).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

fn read_rgb(
    path: &Path,
    width: usize,
    height: usize,
) -> Result<Option<Vec<[u8; 3]>>, DatasetError> {
    if !path.exists() {
        return Ok(None);
    }
    let img = ImageReader::open(path)
        .map_err(|e| DatasetError::io(path, e))?
        .decode()
        .map_err(|source| DatasetError::Image {
            path: path.to_path_buf(),
            source,
        })?
        .into_rgb8();
    if (img.width() as usize, img.height() as usize) != (width, height) {
        return Err(DatasetError::format(
            path,
            "rgb dimensions do not match intrinsics",
        ));
    }
    Ok(Some(img.pixels().map(|p| p.0).collect()))
}
