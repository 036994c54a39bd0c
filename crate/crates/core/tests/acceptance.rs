//! Acceptance suite. Runs without the libtest harness so every criterion prints
//! one PASS/FAIL line; the process exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use pmr_core::dataset::{
    decode_mask_ids, load_sequence, read_map, read_u16_png, render_view, write_map, write_ply,
    write_refined_masks, ColorMode, SceneKind, SyntheticSceneSpec,
};
use pmr_core::kde::{direct_kde, fft_kde, isj_bandwidth, linear_binning, make_grid, GridSpec};
use pmr_core::pipeline::{refinement_report, PipelineConfig};
use pmr_core::refine::{refine_all, refine_mask};
use pmr_core::tsdf::{extract_surface_points, zero_crossings};
use pmr_core::{
    instance_iou, match_instances, voxel_sdf_update, DepthMap, InstanceMask, IntegrationConfig,
    LabeledRgbdFrame, PanopticLabel, PanopticVoxelMap, Pose, RefineConfig, Voxel,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

// ---------------------------------------------------------------- criterion 1

/// Plain double loop over grid points: `f(g_j) = 1/(n h) sum_l c_l phi((g_j - g_l) / h)`.
fn binned_sum(grid: &GridSpec, counts: &[f64], n: usize, h: f64) -> Vec<f64> {
    let pts: Vec<f64> = grid.points().collect();
    pts.iter()
        .map(|&x| {
            counts
                .iter()
                .zip(&pts)
                .map(|(c, &g)| c * phi((x - g) / h))
                .sum::<f64>()
                / (n as f64 * h)
        })
        .collect()
}

/// Samples from a random mixture of up to three Gaussians.
fn mixture_samples(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.random_range(50..2000);
    let k = rng.random_range(1..=3);
    let comps: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.random_range(-5.0..5.0), rng.random_range(0.3..2.0)))
        .collect();
    (0..n)
        .map(|_| {
            let (mu, sd) = comps[rng.random_range(0..k)];
            mu + sd * rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let (mut worst_eq3, mut worst_sup) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let samples = mixture_samples(&mut rng);
        let grid = make_grid(&samples, 1024, 3.0).map_err(|e| e.to_string())?;
        let binned = linear_binning(&samples, &grid).map_err(|e| e.to_string())?;
        let silverman = pmr_core::kde::silverman_bandwidth(&samples).map_err(|e| e.to_string())?;
        let h = silverman * rng.random_range(0.5..2.0);
        let fast = fft_kde(&binned, h).map_err(|e| e.to_string())?;
        let oracle = binned_sum(&grid, binned.counts(), samples.len(), h);
        let exact = direct_kde(&samples, h, &grid.points().collect::<Vec<_>>())
            .map_err(|e| e.to_string())?;
        for ((f, o), e) in fast.densities().iter().zip(&oracle).zip(&exact) {
            worst_eq3 = worst_eq3.max((f - o).abs());
            worst_sup = worst_sup.max((f - e).abs());
        }
    }
    let elapsed = start.elapsed();
    check(
        worst_eq3 <= 1e-9 && worst_sup <= 1e-3 && elapsed < Duration::from_secs(5),
        format!(
            "binned max |diff| {worst_eq3:.2e} (<= 1e-9), vs exact sup {worst_sup:.2e} (<= 1e-3), {:.2} s (< 5 s)",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

/// Exact MISE of a Gaussian-kernel KDE of `n` standard-normal draws.
fn normal_mise(h: f64, n: f64) -> f64 {
    (1.0 / (n * h) + (1.0 - 1.0 / n) / (1.0 + h * h).sqrt()
        - 2.0_f64.sqrt() * 2.0 / (2.0 + h * h).sqrt()
        + 1.0)
        / (2.0 * PI.sqrt())
}

/// Integrated squared error of the sample's exact KDE against the N(0,1) density.
fn sample_ise(samples: &[f64], h: f64, xs: &[f64], dx: f64) -> f64 {
    let f = direct_kde(samples, h, xs).expect("valid kde");
    f.iter()
        .zip(xs)
        .map(|(v, &x)| (v - phi(x)).powi(2))
        .sum::<f64>()
        * dx
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let samples: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
    let grid = make_grid(&samples, 1024, 3.0).map_err(|e| e.to_string())?;
    let binned = linear_binning(&samples, &grid).map_err(|e| e.to_string())?;
    let bw = isj_bandwidth(&binned).map_err(|e| e.to_string())?;

    // Brute-force minimizers over a fine bandwidth grid.
    let hs: Vec<f64> = (1..=600).map(|i| i as f64 * 0.0005).collect();
    let argmin = |f: &dyn Fn(f64) -> f64| {
        hs.iter()
            .copied()
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap()
    };
    let mise_h = argmin(&|h| normal_mise(h, 10_000.0));
    let xs: Vec<f64> = (0..=400).map(|i| -5.0 + i as f64 * 0.025).collect();
    let coarse: Vec<f64> = (40..=300).step_by(4).map(|i| i as f64 * 0.001).collect();
    let ise_h = coarse
        .iter()
        .copied()
        .min_by(|a, b| {
            sample_ise(&samples, *a, &xs, 0.025).total_cmp(&sample_ise(&samples, *b, &xs, 0.025))
        })
        .unwrap();
    let in_range = |h: f64| (0.12..=0.22).contains(&h);

    // Equivariance under x -> a x + b.
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let a = rng.random_range(0.01..100.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let b = rng.random_range(-1000.0..1000.0);
        let t: Vec<f64> = samples.iter().map(|x| a * x + b).collect();
        let g = make_grid(&t, 1024, 3.0).map_err(|e| e.to_string())?;
        let bt = isj_bandwidth(&linear_binning(&t, &g).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        worst = worst.max((bt.value / (a.abs() * bw.value) - 1.0).abs());
    }
    check(
        in_range(bw.value) && !bw.is_fallback() && in_range(mise_h) && in_range(ise_h) && worst <= 1e-6,
        format!(
            "ISJ h = {:.4} in [0.12, 0.22]; MISE-optimal h = {mise_h:.4}, ISE-optimal h = {ise_h:.3}; \
             worst relative transform error {worst:.1e} (<= 1e-6)",
            bw.value
        ),
    )
}

// ---------------------------------------------------------------- criterion 3

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (w, h) = (64, 64);
    let label = PanopticLabel::new(1, 1);
    let cfg = RefineConfig::default();
    let inlier = Normal::new(1.5, 0.01).unwrap();
    let outlier = Normal::new(3.0, 0.01).unwrap();
    let (mut out_total, mut out_removed, mut in_total, mut in_kept) =
        (0usize, 0usize, 0usize, 0usize);
    let mut worst_frame = (1.0f64, 1.0f64);
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = w * h;
        let mut is_out = vec![false; n];
        for i in rand::seq::index::sample(&mut rng, n, n / 10) {
            is_out[i] = true;
        }
        let depth: Vec<f32> = is_out
            .iter()
            .map(|&o| if o { outlier.sample(&mut rng) } else { inlier.sample(&mut rng) } as f32)
            .collect();
        let depth = DepthMap::new(w, h, depth).unwrap();
        let mask = InstanceMask::new(w, h, vec![true; n], label);
        let r = refine_mask(&mask, &depth, &cfg).map_err(|e| e.to_string())?;
        let (mut fo, mut fr, mut fi, mut fk) = (0, 0, 0, 0);
        for (&o, &kept) in is_out.iter().zip(r.mask.bits()) {
            if o {
                fo += 1;
                fr += usize::from(!kept);
            } else {
                fi += 1;
                fk += usize::from(kept);
            }
        }
        worst_frame.0 = worst_frame.0.min(fr as f64 / fo as f64);
        worst_frame.1 = worst_frame.1.min(fk as f64 / fi as f64);
        out_total += fo;
        out_removed += fr;
        in_total += fi;
        in_kept += fk;
    }
    let elapsed = start.elapsed();
    let removed = out_removed as f64 / out_total as f64;
    let kept = in_kept as f64 / in_total as f64;
    check(
        worst_frame.0 >= 0.99 && worst_frame.1 >= 0.99 && elapsed < Duration::from_secs(10),
        format!(
            "outliers removed {:.2}% (worst frame {:.2}%), inliers kept {:.2}% (worst frame {:.2}%), {:.2} s (< 10 s)",
            100.0 * removed,
            100.0 * worst_frame.0,
            100.0 * kept,
            100.0 * worst_frame.1,
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SyntheticSceneSpec::preset(SceneKind::BoxesRoom, 30, 42);
    pmr_core::dataset::generate_synthetic(&spec, dir.path()).map_err(|e| e.to_string())?;
    let reader = load_sequence(dir.path()).map_err(|e| e.to_string())?;
    let (table, [without, with]) =
        refinement_report(reader, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    let gain = with.mean_percent - without.mean_percent;
    print!("{}", table.to_text());
    check(
        gain >= 5.0,
        format!(
            "mask IOU {:.4}% -> {:.4}% ({} instances), gain {gain:+.4} pp (>= 5)",
            without.mean_percent,
            with.mean_percent,
            with.instance_count()
        ),
    )
}

// ---------------------------------------------------------------- criterion 5

fn fuse_views(spec: &SyntheticSceneSpec) -> Result<PanopticVoxelMap, String> {
    let mut map = PanopticVoxelMap::new(0.05, 0.2, [0.0; 3]).map_err(|e| e.to_string())?;
    for pose in &spec.trajectory {
        let view = render_view(spec, pose);
        let frame = LabeledRgbdFrame {
            depth: view.depth,
            masks: vec![],
            intrinsics: spec.intrinsics,
            pose: *pose,
            rgb: None,
        };
        map.integrate_frame(&frame, &IntegrationConfig::default())
            .map_err(|e| e.to_string())?;
    }
    Ok(map)
}

fn criterion_5() -> Outcome {
    let plane = SyntheticSceneSpec::preset(SceneKind::Plane, 20, 0);
    let crossings = zero_crossings(&fuse_views(&plane)?);
    let within = crossings
        .iter()
        .filter(|p| (p.z - 2.0).abs() <= 0.025)
        .count();
    let frac = within as f64 / crossings.len().max(1) as f64;

    let sphere = SyntheticSceneSpec::preset(SceneKind::Sphere, 20, 0);
    let crossings_s = zero_crossings(&fuse_views(&sphere)?);
    let rms = (crossings_s
        .iter()
        .map(|p| (p.coords.norm() - 1.0).powi(2))
        .sum::<f64>()
        / crossings_s.len().max(1) as f64)
        .sqrt();
    check(
        !crossings.is_empty() && frac >= 0.95 && !crossings_s.is_empty() && rms <= 0.025,
        format!(
            "plane: {:.2}% of {} crossings within 0.025 m (>= 95%); sphere: RMS radial error {rms:.4} m over {} crossings (<= 0.025)",
            100.0 * frac,
            crossings.len(),
            crossings_s.len()
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

fn criterion_6() -> Outcome {
    let tau = 0.2f32;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    let mut worst = 0.0f64;
    let mut monotone = true;
    let mut bounded = true;
    for _ in 0..1000 {
        let len = rng.random_range(1..=60);
        let obs: Vec<(f32, f32)> = (0..len)
            .map(|_| (rng.random_range(-tau..=tau), rng.random_range(0.01f32..5.0)))
            .collect();
        let sw: f64 = obs.iter().map(|o| f64::from(o.1)).sum();
        let mean = obs
            .iter()
            .map(|o| f64::from(o.0) * f64::from(o.1))
            .sum::<f64>()
            / sw;
        let scale = obs
            .iter()
            .map(|o| f64::from(o.0.abs()) * f64::from(o.1))
            .sum::<f64>()
            / sw;
        let mut perm = obs.clone();
        perm.shuffle(&mut rng);
        for seq in [&obs, &perm] {
            let mut v = Voxel::default();
            for &(d, w) in seq.iter() {
                let before = v.weight;
                voxel_sdf_update(&mut v, d, w, None).map_err(|e| e.to_string())?;
                monotone &= v.weight > before;
                bounded &= v.tsdf.abs() <= tau;
            }
            worst = worst.max((f64::from(v.tsdf) - mean).abs() / scale.max(f64::MIN_POSITIVE));
        }
    }
    check(
        worst <= 1e-5 && monotone && bounded,
        format!("worst |D - oracle| / scale {worst:.2e} (<= 1e-5), W monotone: {monotone}, |D| <= tau: {bounded}"),
    )
}

// ---------------------------------------------------------------- criterion 7

fn random_map(rng: &mut ChaCha8Rng, n: usize) -> PanopticVoxelMap {
    let mut map =
        PanopticVoxelMap::new(0.05, 0.2, [rng.random(), rng.random(), rng.random()]).unwrap();
    let mut seen = BTreeSet::new();
    while seen.len() < n {
        let idx = [
            rng.random_range(-200..200),
            rng.random_range(-200..200),
            rng.random_range(-50..50),
        ];
        if !seen.insert(idx) {
            continue;
        }
        let votes = (0..rng.random_range(0..4))
            .map(|_| {
                (
                    PanopticLabel::new(rng.random(), rng.random()),
                    rng.random_range(0.001f32..10.0),
                )
            })
            .collect();
        map.insert(
            idx,
            Voxel::from_parts(
                rng.random_range(-0.2f32..0.2),
                rng.random_range(0.001f32..100.0),
                votes,
            ),
        );
    }
    map
}

fn bitwise_equal(a: &PanopticVoxelMap, b: &PanopticVoxelMap) -> bool {
    let (va, vb) = (a.voxels(), b.voxels());
    a.voxel_size().to_bits() == b.voxel_size().to_bits()
        && a.truncation().to_bits() == b.truncation().to_bits()
        && a.origin().map(f64::to_bits) == b.origin().map(f64::to_bits)
        && va.len() == vb.len()
        && va.iter().zip(&vb).all(|((ia, x), (ib, y))| {
            ia == ib
                && x.tsdf.to_bits() == y.tsdf.to_bits()
                && x.weight.to_bits() == y.weight.to_bits()
                && x.votes().len() == y.votes().len()
                && x.votes()
                    .iter()
                    .zip(y.votes())
                    .all(|(p, q)| p.0 == q.0 && p.1.to_bits() == q.1.to_bits())
        })
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let map = random_map(&mut rng, 100_000);
    let mut bytes = Vec::new();
    write_map(&map, &mut bytes).map_err(|e| e.to_string())?;
    let back = read_map(&bytes)?;
    let mut again = Vec::new();
    write_map(&back, &mut again).map_err(|e| e.to_string())?;
    let map_ok = bitwise_equal(&map, &back) && bytes == again;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (w, h) = (97, 53);
    let frames: Vec<Vec<InstanceMask>> = (0..5)
        .map(|_| {
            let mut taken = vec![false; w * h];
            (0..rng.random_range(0..8u32))
                .map(|k| {
                    let bits: Vec<bool> = taken
                        .iter_mut()
                        .map(|t| {
                            let on = !*t && rng.random_bool(0.1);
                            *t |= on;
                            on
                        })
                        .collect();
                    InstanceMask::new(w, h, bits, PanopticLabel::new(7, 1 + k * 37))
                })
                .filter(|m| !m.is_empty())
                .collect()
        })
        .collect();
    write_refined_masks(dir.path(), &frames, w, h).map_err(|e| e.to_string())?;
    let mut masks_ok = true;
    for (i, masks) in frames.iter().enumerate() {
        let (rw, rh, ids) =
            read_u16_png(&dir.path().join(format!("{i:06}.png"))).map_err(|e| e.to_string())?;
        let back = decode_mask_ids(&ids, rw, rh, |id| Some(PanopticLabel::new(7, id)))?;
        masks_ok &= &back == masks;
    }

    let points = extract_surface_points(&map, 0.1).map_err(|e| e.to_string())?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    write_ply(&points, ColorMode::Instance, &mut a).map_err(|e| e.to_string())?;
    write_ply(&points, ColorMode::Instance, &mut b).map_err(|e| e.to_string())?;
    let ply_ok = a == b && !a.is_empty();
    check(
        map_ok && masks_ok && ply_ok,
        format!(
            "PVM1 {} voxels bit-exact: {map_ok}; refined masks exact: {masks_ok}; PLY ({} points, {} bytes) stable: {ply_ok}",
            map.observed_count(),
            points.len(),
            a.len()
        ),
    )
}

// ---------------------------------------------------------------- criterion 8

/// All class-gated partial assignments; returns the lexicographically largest
/// descending IOU vector.
fn best_assignment(iou: &[Vec<f64>]) -> Vec<f64> {
    fn go(
        iou: &[Vec<f64>],
        gt: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<f64>,
        best: &mut Vec<f64>,
    ) {
        if gt == iou.len() {
            let mut v = cur.clone();
            v.sort_by(|a, b| b.total_cmp(a));
            let pad = |x: &Vec<f64>, i: usize| x.get(i).copied().unwrap_or(0.0);
            let n = v.len().max(best.len());
            for i in 0..n {
                match pad(&v, i).total_cmp(&pad(best, i)) {
                    std::cmp::Ordering::Greater => {
                        *best = v;
                        return;
                    }
                    std::cmp::Ordering::Less => return,
                    std::cmp::Ordering::Equal => {}
                }
            }
            return;
        }
        go(iou, gt + 1, used, cur, best);
        for p in 0..used.len() {
            if !used[p] && iou[gt][p] > 0.0 {
                used[p] = true;
                cur.push(iou[gt][p]);
                go(iou, gt + 1, used, cur, best);
                cur.pop();
                used[p] = false;
            }
        }
    }
    let preds = iou.first().map_or(0, Vec::len);
    let mut best = Vec::new();
    go(iou, 0, &mut vec![false; preds], &mut Vec::new(), &mut best);
    best
}

fn random_rect(rng: &mut ChaCha8Rng, w: usize, h: usize, class: u16, id: u32) -> InstanceMask {
    let (x0, y0) = (rng.random_range(0..w - 1), rng.random_range(0..h - 1));
    let (x1, y1) = (rng.random_range(x0 + 1..=w), rng.random_range(y0 + 1..=h));
    let mut m = InstanceMask::empty(w, h, PanopticLabel::new(class, id));
    for y in y0..y1 {
        for x in x0..x1 {
            m.set(x, y, true);
        }
    }
    m
}

fn criterion_8() -> Outcome {
    let l = PanopticLabel::new(1, 1);
    let m =
        |bits: &[u8]| InstanceMask::new(bits.len(), 1, bits.iter().map(|b| *b == 1).collect(), l);
    let fractions = [
        instance_iou(&m(&[1, 1, 0, 0]), &m(&[1, 1, 0, 0])),
        instance_iou(&m(&[1, 1, 0, 0]), &m(&[0, 0, 1, 1])),
        instance_iou(&m(&[1, 1, 0, 0]), &m(&[1, 1, 1, 1])),
        instance_iou(&m(&[1, 1, 0, 0]), &m(&[0, 1, 1, 0])),
    ]
    .map(|r| r.ok().flatten());
    let exact = fractions == [Some(1.0), Some(0.0), Some(0.5), Some(1.0 / 3.0)];

    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    let (mut agree, mut ties) = (0, 0);
    for _ in 0..500 {
        let np = rng.random_range(0..=4);
        let ng = rng.random_range(0..=4);
        let preds: Vec<InstanceMask> = (0..np)
            .map(|i| {
                let class = rng.random_range(1..=2);
                random_rect(&mut rng, 40, 30, class, i)
            })
            .collect();
        let gts: Vec<InstanceMask> = (0..ng)
            .map(|i| {
                let class = rng.random_range(1..=2);
                random_rect(&mut rng, 40, 30, class, i)
            })
            .collect();
        let iou: Vec<Vec<f64>> = gts
            .iter()
            .map(|g| {
                preds
                    .iter()
                    .map(|p| {
                        if p.label.class_id == g.label.class_id {
                            instance_iou(p, g).unwrap().unwrap_or(0.0)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let mut positive: Vec<f64> = iou.iter().flatten().copied().filter(|v| *v > 0.0).collect();
        positive.sort_by(f64::total_cmp);
        ties += usize::from(positive.windows(2).any(|w| w[0] == w[1]));
        let greedy = match_instances(&preds, &gts).map_err(|e| e.to_string())?;
        let mut got: Vec<f64> = greedy.pairs.iter().map(|p| p.iou).collect();
        got.sort_by(|a, b| b.total_cmp(a));
        agree += usize::from(got == best_assignment(&iou));
    }
    check(
        exact && agree == 500,
        format!(
            "fractions exact: {exact}; greedy == exhaustive on {agree}/500 trials ({ties} with tied IOUs)"
        ),
    )
}

// ---------------------------------------------------------------- criterion 9

/// Wall at 3 m with ten boxes at 1.2..2.1 m; each mask covers its box plus a
/// ring of wall pixels.
fn ten_instance_frame() -> LabeledRgbdFrame {
    let k = SyntheticSceneSpec::default_intrinsics();
    let (w, h) = (k.width, k.height);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC9);
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

fn criterion_9() -> Outcome {
    let frame = ten_instance_frame();
    let cfg = RefineConfig {
        parallel: false,
        ..RefineConfig::default()
    };
    let icfg = IntegrationConfig {
        parallel: false,
        ..IntegrationConfig::default()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    let run = || -> Result<(Duration, usize, usize), String> {
        let start = Instant::now();
        let (refined, report) =
            refine_all(&frame.masks, &frame.depth, &cfg).map_err(|e| e.to_string())?;
        let labeled = LabeledRgbdFrame {
            masks: refined.into_iter().map(|r| r.mask).collect(),
            ..frame.clone()
        };
        let mut map = PanopticVoxelMap::new(0.05, 0.2, [0.0; 3]).map_err(|e| e.to_string())?;
        map.integrate_frame(&labeled, &icfg)
            .map_err(|e| e.to_string())?;
        Ok((start.elapsed(), report.refined, map.observed_count()))
    };
    let mut times = Vec::new();
    let mut info = (0, 0);
    for _ in 0..5 {
        let (t, refined, voxels) = pool.install(run)?;
        times.push(t);
        info = (refined, voxels);
    }
    times.sort();
    let median = times[times.len() / 2];
    check(
        median < Duration::from_millis(200) && info.0 == 10,
        format!(
            "median {:.1} ms over 5 runs (< 200 ms), single thread; {} masks refined, {} voxels",
            median.as_secs_f64() * 1e3,
            info.0,
            info.1
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 KDE oracle equivalence", criterion_1),
        ("2 ISJ sanity", criterion_2),
        ("3 outlier rejection", criterion_3),
        ("4 refinement gain", criterion_4),
        ("5 TSDF geometric accuracy", criterion_5),
        ("6 fusion algebra", criterion_6),
        ("7 serialization", criterion_7),
        ("8 metric exactness", criterion_8),
        ("9 throughput", criterion_9),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    println!("{} of 9 acceptance criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
