//! Deterministic inputs shared by the benchmarks.

use pmr_core::dataset::{render_view, SceneKind, SyntheticSceneSpec};
use pmr_core::{DepthMap, InstanceMask, LabeledRgbdFrame, PanopticLabel, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// `n` draws: 90% from N(1.5, 0.01), 10% from N(3.0, 0.01).
pub fn bimodal_samples(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inlier = Normal::new(1.5, 0.01).unwrap();
    let outlier = Normal::new(3.0, 0.01).unwrap();
    (0..n)
        .map(|_| {
            if rng.random_bool(0.1) {
                outlier.sample(&mut rng)
            } else {
                inlier.sample(&mut rng)
            }
        })
        .collect()
}

/// 640x480 frame: wall at 3 m and ten boxes at 1.2..2.1 m, each mask leaking
/// into a 10 px ring of wall pixels.
pub fn ten_instance_frame(seed: u64) -> LabeledRgbdFrame {
    let k = SyntheticSceneSpec::default_intrinsics();
    let (w, h) = (k.width, k.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.003).unwrap();
    let mut depth = vec![3.0f32; w * h];
    let mut masks = Vec::new();
    for i in 0..10u32 {
        let (col, row) = ((i % 5) as usize, (i / 5) as usize);
        let (x0, y0) = (20 + col * 124, 40 + row * 220);
        let (bw, bh) = (90, 150);
        let z = 1.2 + 0.1 * f64::from(i);
        let mut mask = InstanceMask::empty(w, h, PanopticLabel::new(5, 10 + i));
        for y in y0 - 10..y0 + bh + 10 {
            for x in x0.saturating_sub(10)..(x0 + bw + 10).min(w) {
                let inside = (x0..x0 + bw).contains(&x) && (y0..y0 + bh).contains(&y);
                if inside {
                    depth[y * w + x] = (z + noise.sample(&mut rng)) as f32;
                }
                if inside || rng.random_bool(0.5) {
                    mask.set(x, y, true);
                }
            }
        }
        masks.push(mask);
    }
    LabeledRgbdFrame {
        depth: DepthMap::new(w, h, depth).unwrap(),
        masks,
        intrinsics: k,
        pose: Pose::identity(),
        rgb: None,
    }
}

/// First view of the boxes-room preset with 2% of depth pixels zeroed.
pub fn room_depth_with_holes(seed: u64) -> DepthMap {
    let spec = SyntheticSceneSpec::preset(SceneKind::BoxesRoom, 1, seed);
    let view = render_view(&spec, &spec.trajectory[0]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = view
        .depth
        .values()
        .iter()
        .map(|&d| if rng.random_bool(0.02) { 0.0 } else { d })
        .collect();
    DepthMap::new(view.depth.width(), view.depth.height(), values).unwrap()
}
