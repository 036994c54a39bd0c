//! On-disk sequences, synthetic scenes, and map/point-cloud serialization.
//!
//! A sequence directory looks like
//!
//! ```text
//! manifest.txt          key=value: intrinsics, frame count, class and instance tables
//! rgb/000000.png        8-bit RGB (optional)
//! depth/000000.png      16-bit depth, meters = value / depth_scale
//! mask/000000.png       16-bit segment ids, 0 = unlabeled
//! gt_mask/000000.png    16-bit ground-truth segment ids (optional)
//! pose/000000.txt       4x4 row-major camera-to-world
//! ```

mod manifest;
mod mapfile;
mod masks;
mod ply;
mod sequence;
mod synthetic;

pub use manifest::{ClassInfo, SequenceManifest};
pub use mapfile::{load_map, read_map, save_map, write_map, MAP_MAGIC, MAP_VERSION};
pub use masks::{
    decode_mask_ids, encode_mask_ids, read_mask_image, read_u16_png, write_mask_image,
    write_refined_masks, write_u16_png,
};
pub use ply::{export_ply, palette_color, write_ply, ColorMode};
pub use sequence::{load_sequence, Frame, SequenceReader};
pub use synthetic::{
    generate_synthetic, render_view, NoiseModel, Primitive, RenderedView, SceneKind, SceneObject,
    SyntheticSceneSpec,
};

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("frame {index} ({path}): {message}")]
    Frame {
        index: usize,
        path: PathBuf,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("invalid scene specification: {0}")]
    InvalidScene(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, message: impl Into<String>) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    /// Attaches a frame index to an error raised while reading one of its files.
    pub(crate) fn in_frame(self, index: usize) -> Self {
        match self {
            Self::Io { path, source } => Self::Frame {
                index,
                path,
                message: source.to_string(),
            },
            Self::Image { path, source } => Self::Frame {
                index,
                path,
                message: source.to_string(),
            },
            Self::Format { path, message } => Self::Frame {
                index,
                path,
                message,
            },
            other => other,
        }
    }
}

pub(crate) fn frame_file(root: &Path, dir: &str, index: usize, ext: &str) -> PathBuf {
    root.join(dir).join(format!("{index:06}.{ext}"))
}

pub(crate) fn create_dir(path: &Path) -> Result<(), DatasetError> {
    std::fs::create_dir_all(path).map_err(|e| DatasetError::io(path, e))
}
