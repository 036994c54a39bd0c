//! `pmr` subcommands.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};

use pmr_core::dataset::{
    export_ply, generate_synthetic, load_map, load_sequence, read_mask_image, save_map,
    write_refined_masks, ColorMode, SceneKind, SequenceManifest, SyntheticSceneSpec,
};
use pmr_core::eval::ComparisonTable;
use pmr_core::pipeline::prepare_frame;
use pmr_core::tsdf::extract_surface_points;
use pmr_core::{dataset_mask_iou, fuse_sequence, refinement_report, InstanceMask};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "pmr",
    version,
    about = "Depth-based mask refinement and panoptic TSDF fusion"
)]
pub struct Cli {
    /// key=value settings file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Refine predicted masks and write them as 16-bit id images.
    Refine {
        #[arg(long)]
        dataset: PathBuf,
        /// Output directory for refined masks and refine_stats.csv.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: PipelineArgs,
    },
    /// Fill holes, refine (unless disabled) and fuse a sequence into a map file.
    Fuse {
        #[arg(long)]
        dataset: PathBuf,
        /// Output map path.
        #[arg(long)]
        out: PathBuf,
        /// Fuse the predicted masks as they are.
        #[arg(long)]
        no_refine: bool,
        #[command(flatten)]
        params: PipelineArgs,
    },
    /// Write the surface voxels of a map as a colored PLY point cloud.
    ExportPly {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// instance or class.
        #[arg(long)]
        color_by: Option<ColorMode>,
        /// Keep voxels with |tsdf| below this distance in meters [default: voxel size].
        #[arg(long)]
        band: Option<f64>,
    },
    /// Mask IOU of predicted against ground-truth mask images (thing classes).
    EvalIou {
        /// Sequence directory providing the manifest.
        #[arg(long)]
        dataset: PathBuf,
        /// Predicted mask directory [default: <dataset>/mask].
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Ground-truth mask directory [default: <dataset>/gt_mask].
        #[arg(long)]
        gt: Option<PathBuf>,
        /// Also write per-instance scores as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Render a synthetic sequence with ground truth and corrupted predictions.
    GenSynthetic {
        /// plane, sphere or boxes-room.
        #[arg(long)]
        scene: SceneKind,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        depth_sigma: Option<f64>,
        #[arg(long)]
        hole_probability: Option<f64>,
        #[arg(long)]
        leak_probability: Option<f64>,
        #[arg(long)]
        leak_radius: Option<usize>,
        #[arg(long)]
        dilation: Option<usize>,
    },
    /// Compare mask IOU with and without refinement.
    Report {
        #[arg(long)]
        dataset: PathBuf,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        params: PipelineArgs,
    },
}

/// Flags that override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub voxel_size: Option<f64>,
    #[arg(long)]
    pub truncation: Option<f64>,
    /// KDE grid size.
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub density_threshold: Option<f64>,
    #[arg(long)]
    pub min_samples: Option<usize>,
    #[arg(long)]
    pub hole_kernel_size: Option<usize>,
    #[arg(long)]
    pub hole_sigma: Option<f64>,
    /// constant or inverse-square.
    #[arg(long, value_parser = config::parse_weight_mode)]
    pub weight_mode: Option<pmr_core::WeightMode>,
}

impl PipelineArgs {
    fn apply(&self, c: &mut RunConfig) {
        macro_rules! over {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { c.$f = v; } )*};
        }
        over!(
            voxel_size,
            truncation,
            grid_points,
            density_threshold,
            min_samples,
            hole_kernel_size,
            hole_sigma,
            weight_mode
        );
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    if let Some(p) = path {
        c.apply_file(p)?;
    }
    Ok(c)
}

/// Refuses output paths inside the input dataset directory.
fn ensure_outside(dataset: &Path, out: &Path) -> Result<()> {
    let root = dataset
        .canonicalize()
        .with_context(|| format!("dataset directory {}", dataset.display()))?;
    let mut probe = out.to_path_buf();
    let resolved = loop {
        if let Ok(p) = probe.canonicalize() {
            break p;
        }
        if !probe.pop() || probe.as_os_str().is_empty() {
            break std::env::current_dir()?;
        }
    };
    ensure!(
        !resolved.starts_with(&root),
        "output {} lies inside the input dataset {}",
        out.display(),
        dataset.display()
    );
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Refine {
            dataset,
            out,
            params,
        } => {
            params.apply(&mut cfg);
            cfg.validate()?;
            ensure_outside(&dataset, &out)?;
            refine(&dataset, &out, &cfg)
        }
        Command::Fuse {
            dataset,
            out,
            no_refine,
            params,
        } => {
            params.apply(&mut cfg);
            if no_refine {
                cfg.refine = false;
            }
            cfg.validate()?;
            ensure_outside(&dataset, &out)?;
            let reader = load_sequence(&dataset)?;
            let start = Instant::now();
            let fused = fuse_sequence(reader, &cfg.pipeline())?;
            save_map(&fused.map, &out)?;
            log::info!(
                "fused {} frames into {} voxels in {:.2} s ({} masks refined, {} pixels removed); wrote {}",
                fused.frames,
                fused.map.observed_count(),
                start.elapsed().as_secs_f64(),
                fused.refine.refined,
                fused.refine.pixels_removed,
                out.display()
            );
            Ok(())
        }
        Command::ExportPly {
            map,
            out,
            color_by,
            band,
        } => {
            if let Some(c) = color_by {
                cfg.color_by = c;
            }
            let map = load_map(&map)?;
            let points = extract_surface_points(&map, band.unwrap_or(map.voxel_size()))?;
            export_ply(&points, &out, cfg.color_by)?;
            log::info!("wrote {} points to {}", points.len(), out.display());
            Ok(())
        }
        Command::EvalIou {
            dataset,
            pred,
            gt,
            csv,
        } => {
            let manifest = SequenceManifest::load(&dataset)?;
            let pred = pred.unwrap_or_else(|| dataset.join("mask"));
            let gt = gt.unwrap_or_else(|| dataset.join("gt_mask"));
            if let Some(p) = &csv {
                ensure_outside(&dataset, p)?;
            }
            eval_iou(&manifest, &pred, &gt, csv.as_deref())
        }
        Command::GenSynthetic {
            scene,
            frames,
            seed,
            out,
            depth_sigma,
            hole_probability,
            leak_probability,
            leak_radius,
            dilation,
        } => {
            ensure!(frames >= 1, "--frames must be at least 1");
            let mut spec = SyntheticSceneSpec::preset(scene, frames, seed);
            let n = &mut spec.noise;
            n.depth_sigma = depth_sigma.unwrap_or(n.depth_sigma);
            n.hole_probability = hole_probability.unwrap_or(n.hole_probability);
            n.leak_probability = leak_probability.unwrap_or(n.leak_probability);
            n.leak_radius = leak_radius.unwrap_or(n.leak_radius);
            n.dilation = dilation.unwrap_or(n.dilation);
            let m = generate_synthetic(&spec, &out)?;
            log::info!("wrote {} frames to {}", m.frame_count, out.display());
            Ok(())
        }
        Command::Report {
            dataset,
            csv,
            params,
        } => {
            params.apply(&mut cfg);
            cfg.validate()?;
            if let Some(p) = &csv {
                ensure_outside(&dataset, p)?;
            }
            let reader = load_sequence(&dataset)?;
            let (table, _) = refinement_report(reader, &cfg.pipeline())?;
            print!("{}", table.to_text());
            if let Some(p) = csv {
                std::fs::write(&p, table.to_csv())
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(())
        }
    }
}

fn refine(dataset: &Path, out: &Path, cfg: &RunConfig) -> Result<()> {
    let reader = load_sequence(dataset)?;
    let manifest = reader.manifest().clone();
    if manifest.frame_count == 0 {
        bail!("dataset {} has no frames", dataset.display());
    }
    let pipeline = cfg.pipeline();
    let refine_cfg = pipeline.refine_for(&manifest);
    let mut frames = Vec::with_capacity(manifest.frame_count);
    let mut stats = String::from("frame,refined,skipped,passed_through,pixels_removed\n");
    for frame in reader {
        let frame = frame?;
        let start = Instant::now();
        let prepared = prepare_frame(&frame, &pipeline.hole_fill, Some(&refine_cfg))?;
        let r = prepared.report.unwrap_or_default();
        let _ = writeln!(
            stats,
            "{},{},{},{},{}",
            frame.index, r.refined, r.skipped, r.passed_through, r.pixels_removed
        );
        log::info!(
            "frame {}: {} refined, {} skipped, {} pixels removed ({:.1} ms)",
            frame.index,
            r.refined,
            r.skipped,
            r.pixels_removed,
            start.elapsed().as_secs_f64() * 1e3
        );
        frames.push(prepared.masks);
    }
    let k = &manifest.intrinsics;
    write_refined_masks(out, &frames, k.width, k.height)?;
    let stats_path = out.join("refine_stats.csv");
    std::fs::write(&stats_path, stats)
        .with_context(|| format!("writing {}", stats_path.display()))?;
    Ok(())
}

fn read_mask_dir(dir: &Path, manifest: &SequenceManifest) -> Result<Vec<Vec<InstanceMask>>> {
    (0..manifest.frame_count)
        .map(|i| {
            let path = dir.join(format!("{i:06}.png"));
            let masks = read_mask_image(&path, manifest).with_context(|| format!("frame {i}"))?;
            Ok(masks
                .into_iter()
                .filter(|m| manifest.is_thing(m.label.class_id))
                .collect())
        })
        .collect()
}

fn eval_iou(manifest: &SequenceManifest, pred: &Path, gt: &Path, csv: Option<&Path>) -> Result<()> {
    let preds = read_mask_dir(pred, manifest)?;
    let gts = read_mask_dir(gt, manifest)?;
    let report = dataset_mask_iou(&preds, &gts, "predicted")?;
    let table = ComparisonTable::from_reports(std::slice::from_ref(&report));
    print!("{}", table.to_text());
    println!(
        "{} instances: {} matched, {} unmatched",
        report.instance_count(),
        report.matched,
        report.unmatched
    );
    if let Some(path) = csv {
        let mut s = String::from("frame,class_id,instance_id,iou\n");
        for (f, scores) in report.per_frame.iter().enumerate() {
            for sc in scores {
                let _ = writeln!(
                    s,
                    "{f},{},{},{:.6}",
                    sc.label.class_id, sc.label.instance_id, sc.iou
                );
            }
        }
        std::fs::write(path, s).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
