use proptest::prelude::*;

use pmr_core::dataset::{read_map, write_map};
use pmr_core::kde::make_grid;
use pmr_core::refine::{find_cutoffs, RefineStatus};
use pmr_core::{
    fft_kde, instance_iou, linear_binning, match_instances, refine_mask, voxel_label,
    voxel_sdf_update, DepthMap, InstanceMask, PanopticLabel, PanopticVoxelMap, RefineConfig, Voxel,
};

fn mask_strategy(w: usize, h: usize) -> impl Strategy<Value = (Vec<bool>, u16)> {
    (prop::collection::vec(any::<bool>(), w * h), 1u16..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binning_conserves_mass(samples in prop::collection::vec(0.3f64..6.0, 2..400), points in 16usize..512) {
        let grid = make_grid(&samples, points, 3.0).unwrap();
        let b = linear_binning(&samples, &grid).unwrap();
        prop_assert_eq!(b.counts().len(), points);
        prop_assert!(b.counts().iter().all(|&c| c >= 0.0));
        let total: f64 = b.counts().iter().sum();
        prop_assert!((total - samples.len() as f64).abs() < 1e-9 * samples.len() as f64);
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        prop_assert!((b.moments().0 - mean).abs() < 1e-9);
    }

    #[test]
    fn kde_is_finite_and_nonnegative(samples in prop::collection::vec(0.3f64..6.0, 2..300), h in 0.005f64..0.5) {
        let grid = make_grid(&samples, 256, 3.0).unwrap();
        let est = fft_kde(&linear_binning(&samples, &grid).unwrap(), h).unwrap();
        prop_assert_eq!(est.densities().len(), 256);
        prop_assert!(est.densities().iter().all(|d| d.is_finite() && *d >= -1e-12));
        prop_assert!(est.peak_index() < 256);
    }

    #[test]
    fn cutoffs_bracket_the_peak(samples in prop::collection::vec(0.3f64..6.0, 2..300), h in 0.005f64..0.5) {
        let grid = make_grid(&samples, 256, 3.0).unwrap();
        let est = fft_kde(&linear_binning(&samples, &grid).unwrap(), h).unwrap();
        if let Ok(c) = find_cutoffs(&est, 1e-6) {
            let mode = grid.point(est.peak_index());
            prop_assert!(c.low <= mode && mode <= c.high);
            prop_assert!(c.low >= grid.start() && c.high <= grid.end());
        }
    }

    #[test]
    fn refinement_only_removes_pixels(
        (bits, class) in mask_strategy(16, 12),
        depths in prop::collection::vec(prop_oneof![Just(0.0f32), 0.5f32..5.0], 16 * 12),
        stuff in any::<bool>(),
    ) {
        let mask = InstanceMask::new(16, 12, bits, PanopticLabel::new(class, 1));
        let depth = DepthMap::new(16, 12, depths).unwrap();
        let mut cfg = RefineConfig { min_samples: 8, parallel: false, ..RefineConfig::default() };
        if stuff {
            cfg.stuff_classes.insert(class);
        }
        let r = refine_mask(&mask, &depth, &cfg).unwrap();
        prop_assert!(r.mask.is_subset_of(&mask));
        prop_assert_eq!(r.mask.label, mask.label);
        match r.status {
            RefineStatus::Refined { removed, .. } => prop_assert_eq!(removed, mask.count() - r.mask.count()),
            RefineStatus::Skipped(_) | RefineStatus::PassedThrough => prop_assert_eq!(&r.mask, &mask),
        }
        if stuff {
            prop_assert_eq!(r.status, RefineStatus::PassedThrough);
        }
    }

    #[test]
    fn fusion_keeps_mean_within_observations(obs in prop::collection::vec((-0.2f32..=0.2, 0.01f32..4.0, 0u16..3), 1..50)) {
        let mut v = Voxel::default();
        let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
        for &(d, w, c) in &obs {
            let before = v.weight;
            let label = (c > 0).then(|| PanopticLabel::new(c, 1));
            voxel_sdf_update(&mut v, d, w, label).unwrap();
            prop_assert!(v.weight > before);
            lo = lo.min(d);
            hi = hi.max(d);
            prop_assert!(v.tsdf >= lo - 1e-5 && v.tsdf <= hi + 1e-5);
        }
        let voted: f32 = v.votes().iter().map(|(_, w)| w).sum();
        prop_assert!(voted <= v.weight * (1.0 + 1e-5));
        prop_assert_eq!(voxel_label(&v).is_some(), !v.votes().is_empty());
    }

    #[test]
    fn iou_is_symmetric_and_bounded((a, ca) in mask_strategy(8, 8), (b, _) in mask_strategy(8, 8)) {
        let a = InstanceMask::new(8, 8, a, PanopticLabel::new(ca, 1));
        let b = InstanceMask::new(8, 8, b, PanopticLabel::new(ca, 2));
        let ab = instance_iou(&a, &b).unwrap();
        prop_assert_eq!(ab, instance_iou(&b, &a).unwrap());
        if let Some(x) = ab {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        prop_assert_eq!(instance_iou(&a, &a).unwrap(), (!a.is_empty()).then_some(1.0));
    }

    #[test]
    fn matching_is_a_class_gated_injection(
        preds in prop::collection::vec(mask_strategy(6, 6), 0..6),
        gts in prop::collection::vec(mask_strategy(6, 6), 0..6),
    ) {
        let build = |v: Vec<(Vec<bool>, u16)>| -> Vec<InstanceMask> {
            v.into_iter().enumerate().map(|(i, (b, c))| InstanceMask::new(6, 6, b, PanopticLabel::new(c, i as u32 + 1))).collect()
        };
        let (preds, gts) = (build(preds), build(gts));
        let m = match_instances(&preds, &gts).unwrap();
        prop_assert_eq!(m.pairs.len() + m.unmatched_gts.len(), gts.len());
        prop_assert_eq!(m.pairs.len() + m.unmatched_preds.len(), preds.len());
        let mut seen_p = vec![false; preds.len()];
        let mut seen_g = vec![false; gts.len()];
        for p in &m.pairs {
            prop_assert!(!seen_p[p.pred] && !seen_g[p.gt]);
            seen_p[p.pred] = true;
            seen_g[p.gt] = true;
            prop_assert_eq!(preds[p.pred].label.class_id, gts[p.gt].label.class_id);
            prop_assert!(p.iou > 0.0 && p.iou <= 1.0);
        }
        prop_assert!(m.pairs.windows(2).all(|w| w[0].iou >= w[1].iou));
    }

    #[test]
    fn map_file_round_trips(
        voxels in prop::collection::vec(((-40i32..40, -40i32..40, -40i32..40), -0.2f32..0.2, 0.1f32..50.0, 0u16..4), 0..200),
        size in 0.01f64..0.2,
    ) {
        let mut map = PanopticVoxelMap::new(size, 4.0 * size, [0.5, -1.0, 2.0]).unwrap();
        for ((x, y, z), d, w, c) in voxels {
            let votes = if c > 0 { vec![(PanopticLabel::new(c, 7), w)] } else { Vec::new() };
            map.insert([x, y, z], Voxel::from_parts(d, w, votes));
        }
        let mut buf = Vec::new();
        write_map(&map, &mut buf).unwrap();
        let back = read_map(&buf).unwrap();
        prop_assert!(back == map);
        let mut again = Vec::new();
        write_map(&back, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }
}
