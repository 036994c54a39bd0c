use std::collections::BTreeMap;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageReader, Luma};

use super::{create_dir, frame_file, DatasetError, SequenceManifest};
use crate::refine::{InstanceMask, PanopticLabel};

/// Reads a single-channel 16-bit PNG as `(width, height, pixels)`.
pub fn read_u16_png(path: &Path) -> Result<(usize, usize, Vec<u16>), DatasetError> {
    let img = ImageReader::open(path)
        .map_err(|e| DatasetError::io(path, e))?
        .decode()
        .map_err(|source| DatasetError::Image {
            path: path.to_path_buf(),
            source,
        })?;
    match img {
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            Ok((w as usize, h as usize, buf.into_raw()))
        }
        other => Err(DatasetError::format(
            path,
            format!("expected 16-bit grayscale, got {:?}", other.color()),
        )),
    }
}

pub fn write_u16_png(
    path: &Path,
    width: usize,
    height: usize,
    data: Vec<u16>,
) -> Result<(), DatasetError> {
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width as u32, height as u32, data)
            .ok_or_else(|| DatasetError::format(path, "pixel count does not match dimensions"))?;
    buf.save(path).map_err(|source| DatasetError::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Splits a segment-id image into one mask per distinct non-zero id, in ascending id order.
pub fn decode_mask_ids(
    ids: &[u16],
    width: usize,
    height: usize,
    label_for: impl Fn(u32) -> Option<PanopticLabel>,
) -> Result<Vec<InstanceMask>, String> {
    if ids.len() != width * height {
        return Err(format!(
            "{} pixels for a {width}x{height} mask image",
            ids.len()
        ));
    }
    let mut bitmaps: BTreeMap<u16, Vec<bool>> = BTreeMap::new();
    for (i, &id) in ids.iter().enumerate() {
        if id != 0 {
            bitmaps.entry(id).or_insert_with(|| vec![false; ids.len()])[i] = true;
        }
    }
    bitmaps
        .into_iter()
        .map(|(id, bits)| {
            let label = label_for(u32::from(id))
                .ok_or_else(|| format!("segment id {id} is not in the instance table"))?;
            Ok(InstanceMask::new(width, height, bits, label))
        })
        .collect()
}

/// Paints masks into a segment-id image; where masks overlap the later mask wins.
pub fn encode_mask_ids(
    masks: &[InstanceMask],
    width: usize,
    height: usize,
) -> Result<Vec<u16>, String> {
    let mut ids = vec![0u16; width * height];
    for m in masks {
        if (m.width(), m.height()) != (width, height) {
            return Err(format!(
                "mask {} is {}x{}, image is {width}x{height}",
                m.label,
                m.width(),
                m.height()
            ));
        }
        let id = u16::try_from(m.label.instance_id)
            .ok()
            .filter(|id| *id != 0)
            .ok_or_else(|| {
                format!(
                    "instance id {} cannot be stored in a mask image",
                    m.label.instance_id
                )
            })?;
        for (dst, &set) in ids.iter_mut().zip(m.bits()) {
            if set {
                *dst = id;
            }
        }
    }
    Ok(ids)
}

/// Reads a mask image and resolves segment ids through the manifest's instance table.
pub fn read_mask_image(
    path: &Path,
    manifest: &SequenceManifest,
) -> Result<Vec<InstanceMask>, DatasetError> {
    let (w, h, ids) = read_u16_png(path)?;
    let k = &manifest.intrinsics;
    if (w, h) != (k.width, k.height) {
        return Err(DatasetError::format(
            path,
            format!("mask is {w}x{h}, expected {}x{}", k.width, k.height),
        ));
    }
    decode_mask_ids(&ids, w, h, |id| manifest.label_for(id))
        .map_err(|m| DatasetError::format(path, m))
}

pub fn write_mask_image(
    path: &Path,
    masks: &[InstanceMask],
    width: usize,
    height: usize,
) -> Result<(), DatasetError> {
    let ids = encode_mask_ids(masks, width, height).map_err(|m| DatasetError::format(path, m))?;
    write_u16_png(path, width, height, ids)
}

/// Writes `out/NNNNNN.png` for every frame, `NNNNNN` being the position in `frames`.
pub fn write_refined_masks(
    out: &Path,
    frames: &[Vec<InstanceMask>],
    width: usize,
    height: usize,
) -> Result<(), DatasetError> {
    create_dir(out)?;
    for (index, masks) in frames.iter().enumerate() {
        let path = frame_file(out, "", index, "png");
        write_mask_image(&path, masks, width, height)?;
    }
    Ok(())
}
