use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{frame_file, DatasetError};
use crate::camera::CameraIntrinsics;
use crate::refine::PanopticLabel;

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassInfo {
    pub name: String,
    /// Countable object class; stuff classes are not refined.
    pub is_thing: bool,
}

/// Parsed `manifest.txt` of a sequence directory.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceManifest {
    pub root: PathBuf,
    pub frame_count: usize,
    pub intrinsics: CameraIntrinsics,
    pub classes: BTreeMap<u16, ClassInfo>,
    /// Segment id in mask images -> class id.
    pub instances: BTreeMap<u32, u16>,
}

impl SequenceManifest {
    pub fn rgb_path(&self, index: usize) -> PathBuf {
        frame_file(&self.root, "rgb", index, "png")
    }

    pub fn depth_path(&self, index: usize) -> PathBuf {
        frame_file(&self.root, "depth", index, "png")
    }

    pub fn mask_path(&self, index: usize) -> PathBuf {
        frame_file(&self.root, "mask", index, "png")
    }

    pub fn gt_mask_path(&self, index: usize) -> PathBuf {
        frame_file(&self.root, "gt_mask", index, "png")
    }

    pub fn pose_path(&self, index: usize) -> PathBuf {
        frame_file(&self.root, "pose", index, "txt")
    }

    pub fn has_ground_truth(&self) -> bool {
        self.root.join("gt_mask").is_dir()
    }

    pub fn label_for(&self, segment_id: u32) -> Option<PanopticLabel> {
        self.instances
            .get(&segment_id)
            .map(|&class_id| PanopticLabel::new(class_id, segment_id))
    }

    pub fn stuff_classes(&self) -> BTreeSet<u16> {
        self.classes
            .iter()
            .filter(|(_, c)| !c.is_thing)
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn is_thing(&self, class_id: u16) -> bool {
        self.classes.get(&class_id).is_some_and(|c| c.is_thing)
    }

    /// Reads `<root>/manifest.txt`.
    pub fn load(root: &Path) -> Result<Self, DatasetError> {
        let path = root.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
        Self::parse(root, &text)
    }

    pub fn parse(root: &Path, text: &str) -> Result<Self, DatasetError> {
        let path = root.join(MANIFEST_FILE);
        let err = |line: usize, message: String| DatasetError::Manifest {
            path: path.clone(),
            line,
            message,
        };
        let mut scalars: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        let mut classes = BTreeMap::new();
        let mut instances = BTreeMap::new();

        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "class" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    let [id, name, kind] = parts[..] else {
                        return Err(err(line_no, "class needs <id>,<name>,<thing|stuff>".into()));
                    };
                    let id: u16 = id
                        .parse()
                        .map_err(|_| err(line_no, format!("bad class id {id:?}")))?;
                    let is_thing = match kind {
                        "thing" => true,
                        "stuff" => false,
                        other => return Err(err(line_no, format!("unknown class kind {other:?}"))),
                    };
                    if classes
                        .insert(
                            id,
                            ClassInfo {
                                name: name.to_string(),
                                is_thing,
                            },
                        )
                        .is_some()
                    {
                        return Err(err(line_no, format!("duplicate class {id}")));
                    }
                }
                "instance" => {
                    let (id, class) = value
                        .split_once(',')
                        .ok_or_else(|| err(line_no, "instance needs <id>,<class_id>".into()))?;
                    let id: u32 = id
                        .trim()
                        .parse()
                        .map_err(|_| err(line_no, format!("bad instance id {id:?}")))?;
                    let class: u16 = class
                        .trim()
                        .parse()
                        .map_err(|_| err(line_no, format!("bad class id {class:?}")))?;
                    if id == 0 || id > u32::from(u16::MAX) {
                        return Err(err(line_no, format!("instance id {id} outside 1..=65535")));
                    }
                    if instances.insert(id, class).is_some() {
                        return Err(err(line_no, format!("duplicate instance {id}")));
                    }
                }
                _ => {
                    if scalars.insert(key, (line_no, value)).is_some() {
                        return Err(err(line_no, format!("duplicate key {key}")));
                    }
                }
            }
        }

        let mut get = |key: &str| -> Result<(usize, &str), DatasetError> {
            scalars
                .remove(key)
                .ok_or_else(|| err(0, format!("missing key {key}")))
        };
        macro_rules! parse {
            ($key:literal, $ty:ty) => {{
                let (line, v) = get($key)?;
                v.parse::<$ty>()
                    .map_err(|_| err(line, format!("bad value for {}: {v:?}", $key)))?
            }};
        }
        let width = parse!("width", usize);
        let height = parse!("height", usize);
        let fx = parse!("fx", f64);
        let fy = parse!("fy", f64);
        let cx = parse!("cx", f64);
        let cy = parse!("cy", f64);
        let depth_scale = parse!("depth_scale", f64);
        let frame_count = parse!("frames", usize);
        if let Some((key, (line, _))) = scalars.into_iter().next() {
            return Err(err(line, format!("unknown key {key}")));
        }
        let intrinsics = CameraIntrinsics::new(fx, fy, cx, cy, width, height, depth_scale)
            .map_err(|e| err(0, e.to_string()))?;
        for (id, class) in &instances {
            if !classes.contains_key(class) {
                return Err(err(
                    0,
                    format!("instance {id} refers to unknown class {class}"),
                ));
            }
        }
        Ok(Self {
            root: root.to_path_buf(),
            frame_count,
            intrinsics,
            classes,
            instances,
        })
    }

    pub fn to_text(&self) -> String {
        let k = &self.intrinsics;
        let mut s = String::new();
        let _ = writeln!(s, "width={}", k.width);
        let _ = writeln!(s, "height={}", k.height);
        let _ = writeln!(s, "fx={}", k.fx);
        let _ = writeln!(s, "fy={}", k.fy);
        let _ = writeln!(s, "cx={}", k.cx);
        let _ = writeln!(s, "cy={}", k.cy);
        let _ = writeln!(s, "depth_scale={}", k.depth_scale);
        let _ = writeln!(s, "frames={}", self.frame_count);
        for (id, c) in &self.classes {
            let kind = if c.is_thing { "thing" } else { "stuff" };
            let _ = writeln!(s, "class={id},{},{kind}", c.name);
        }
        for (id, class) in &self.instances {
            let _ = writeln!(s, "instance={id},{class}");
        }
        s
    }

    pub fn save(&self) -> Result<(), DatasetError> {
        let path = self.root.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_text()).map_err(|e| DatasetError::io(&path, e))
    }
}
