//! `ocpose` — evaluate multi-person pose estimation with optimal-transport
//! matching alongside a ranked-mAP baseline.
//!
//! Logging goes to stderr; machine output (JSON) goes to stdout or, with
//! `--out`, to files. Exit codes: 0 success, 1 usage error, 2 data error,
//! 3 io error.

mod emit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ocpose_core::dataset::{
    generate_scenes, scenes_to_gt_json, scenes_to_results_json, SigmaTable, SynthSpec,
};
use ocpose_core::pipeline::{
    compare_paths, default_sweep_grid, evaluate_paths, pr_curves_paths, sweep_paths, Aggregation,
    EvalOptions,
};
use ocpose_core::ranking::{ApInterpolation, IgnoreMode};
use ocpose_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ocpose",
    version,
    about = "Optimal-transport evaluation of multi-person pose estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// COCO ground-truth annotation file.
    #[arg(long, global = true)]
    gt: Option<PathBuf>,

    /// COCO results file; repeat for `compare`.
    #[arg(long, global = true)]
    dt: Vec<PathBuf>,

    /// Detection confidence threshold.
    #[arg(long, global = true, default_value_t = 0.0)]
    threshold: f64,

    /// JSON list of per-joint kernel constants (defaults to the 17 COCO values).
    #[arg(long, global = true)]
    sigmas: Option<PathBuf>,

    /// Expansion factor applied to GT boxes in legacy bbox mode.
    #[arg(long, global = true, default_value_t = 1.0)]
    bbox_expand: f64,

    /// Drop detection-crowd matches from the scored pair set.
    #[arg(long, global = true)]
    exclude_crowd_matches: bool,

    /// Which aggregation the summary headline uses.
    #[arg(long, global = true, value_enum, default_value_t = AggregationArg::Pooled)]
    aggregation: AggregationArg,

    /// Worker bound for per-image parallelism (0 = default pool, 1 = sequential).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// RNG seed for synthetic generation.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,

    /// Output directory for report files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Score ignore regions by their bounding box instead of the pixel mask.
    #[arg(long, global = true)]
    legacy_bbox: bool,

    /// COCO-style 101-point AP interpolation instead of the exact envelope.
    #[arg(long, global = true)]
    ap_101: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AggregationArg {
    #[value(name = "per-image")]
    PerImage,
    Pooled,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one prediction file and emit the full report.
    Evaluate,
    /// Re-evaluate across a confidence-threshold grid and report the
    /// threshold minimizing the transport score.
    Sweep {
        /// Comma-separated thresholds (default 0.00..0.95 step 0.01).
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Emit precision-recall curves per confidence threshold.
    #[command(name = "pr-curve")]
    PrCurve {
        /// Confidence thresholds to draw, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.0,0.1,0.2,0.3")]
        thresholds: Vec<f64>,
    },
    /// Evaluate several prediction files side by side.
    Compare,
    /// Generate a synthetic GT/prediction fixture pair.
    Synth {
        #[arg(long, default_value_t = 2)]
        images: usize,
        #[arg(long, default_value_t = 3)]
        poses: usize,
        #[arg(long, default_value_t = 0)]
        masks: usize,
        #[arg(long, default_value_t = 0)]
        crowds: usize,
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, default_value_t = 0)]
        duplicates: usize,
        #[arg(long, default_value_t = 0.5)]
        duplicate_score: f64,
        #[arg(long, default_value_t = 0)]
        far_fp: usize,
        #[arg(long, default_value_t = 0.05)]
        fp_score: f64,
        #[arg(long, default_value_t = 0.9)]
        perfect_score: f64,
        #[arg(long, default_value_t = 640)]
        width: usize,
        #[arg(long, default_value_t = 640)]
        height: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap's own exit codes don't match ours; usage problems are 1
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn build_options(cli: &Cli) -> Result<EvalOptions> {
    let sigmas = match &cli.sigmas {
        Some(path) => SigmaTable::from_json_file(path)?,
        None => SigmaTable::coco17(),
    };
    if cli.bbox_expand <= 0.0 {
        return Err(Error::Usage("--bbox-expand must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cli.threshold) {
        return Err(Error::Usage("--threshold must lie in [0,1]".into()));
    }
    Ok(EvalOptions {
        threshold: cli.threshold,
        sigmas,
        bbox_expand: cli.bbox_expand,
        exclude_crowd_matches: cli.exclude_crowd_matches,
        aggregation: match cli.aggregation {
            AggregationArg::PerImage => Aggregation::PerImageMean,
            AggregationArg::Pooled => Aggregation::Pooled,
        },
        jobs: cli.jobs,
        interpolation: if cli.ap_101 {
            ApInterpolation::Points101
        } else {
            ApInterpolation::Envelope
        },
        ignore_mode: if cli.legacy_bbox {
            IgnoreMode::LegacyBbox
        } else {
            IgnoreMode::Mask
        },
        ..EvalOptions::default()
    })
}

fn require_gt(cli: &Cli) -> Result<&PathBuf> {
    cli.gt
        .as_ref()
        .ok_or_else(|| Error::Usage("--gt <file> is required".into()))
}

fn require_single_dt(cli: &Cli) -> Result<&PathBuf> {
    match cli.dt.as_slice() {
        [one] => Ok(one),
        [] => Err(Error::Usage("--dt <file> is required".into())),
        _ => Err(Error::Usage(
            "exactly one --dt is expected for this command".into(),
        )),
    }
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Evaluate => {
            let opts = build_options(&cli)?;
            let gt = require_gt(&cli)?;
            let dt = require_single_dt(&cli)?;
            let (report, gt_summary, dt_summary) = evaluate_paths(gt, dt, &opts)?;
            for warning in gt_summary.warnings.iter().chain(&dt_summary.warnings) {
                eprintln!("warning: {warning}");
            }
            eprintln!(
                "loaded {} images: {} poses, {} masks, {} crowd masks ({} demoted, {} dropped)",
                gt_summary.images,
                gt_summary.poses,
                gt_summary.masks,
                gt_summary.crowd_masks,
                gt_summary.demoted_to_mask,
                gt_summary.dropped
            );
            eprintln!(
                "detections: {} kept of {} ({} below threshold, {} rejected)",
                dt_summary.kept,
                dt_summary.total,
                dt_summary.below_threshold,
                dt_summary.rejected_score
            );
            eprintln!(
                "ocpose[{}] = {:.6}   mAP = {:.6}   fp = {}   fn = {}",
                report.config.aggregation,
                report.headline_ocpose(),
                report.aggregate.map,
                report.aggregate.total_fp,
                report.aggregate.total_fn
            );
            if let Some(dir) = &cli.out {
                for path in emit::write_report_files(dir, &report)? {
                    eprintln!("wrote {}", path.display());
                }
            }
            println!("{}", report.to_json_pretty());
            Ok(())
        }
        Command::Sweep { grid } => {
            let opts = build_options(&cli)?;
            let gt = require_gt(&cli)?;
            let dt = require_single_dt(&cli)?;
            let grid = grid.clone().unwrap_or_else(default_sweep_grid);
            let result = sweep_paths(gt, dt, &grid, &opts)?;
            eprintln!(
                "sweep over {} thresholds: argmin ocpose {:.6} at threshold {:.2}",
                result.grid.len(),
                result.argmin_ocpose,
                result.argmin_threshold
            );
            if let Some(dir) = &cli.out {
                let path = emit::write_sweep_csv(dir, &result)?;
                eprintln!("wrote {}", path.display());
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&result).expect("sweep serializes")
            );
            Ok(())
        }
        Command::PrCurve { thresholds } => {
            let opts = build_options(&cli)?;
            let gt = require_gt(&cli)?;
            let dt = require_single_dt(&cli)?;
            let out = cli
                .out
                .as_ref()
                .ok_or_else(|| Error::Usage("pr-curve requires --out <dir>".into()))?;
            let sets = pr_curves_paths(gt, dt, thresholds, &opts)?;
            for path in emit::write_pr_curves(out, &sets)? {
                eprintln!("wrote {}", path.display());
            }
            let summary: Vec<serde_json::Value> = sets
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "confidence_threshold": s.confidence_threshold,
                        "map": s.map,
                        "kept_detections": s.kept_detections,
                        "fp_count_first_oks": s.curves.first().map_or(0, |c| c.fp_count),
                    })
                })
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            Ok(())
        }
        Command::Compare => {
            let opts = build_options(&cli)?;
            let gt = require_gt(&cli)?;
            if cli.dt.len() < 2 {
                return Err(Error::Usage("compare needs at least two --dt files".into()));
            }
            let result = compare_paths(gt, &cli.dt, &opts)?;
            eprintln!(
                "{:<24} {:>10} {:>14} {:>12} {:>8}",
                "method", "mAP", "ocpose_pooled", "detections", "fp"
            );
            for row in &result.rows {
                eprintln!(
                    "{:<24} {:>10.4} {:>14.4} {:>12} {:>8}",
                    row.name, row.map, row.ocpose_pooled, row.detections, row.total_fp
                );
            }
            if result.rank_disagreement {
                for [a, b] in &result.disagreements {
                    eprintln!("rank disagreement: {a} vs {b}");
                }
            } else {
                eprintln!("metrics agree on the ranking");
            }
            if let Some(dir) = &cli.out {
                let path = emit::write_compare_csv(dir, &result)?;
                eprintln!("wrote {}", path.display());
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&result).expect("compare serializes")
            );
            Ok(())
        }
        Command::Synth {
            images,
            poses,
            masks,
            crowds,
            jitter,
            duplicates,
            duplicate_score,
            far_fp,
            fp_score,
            perfect_score,
            width,
            height,
        } => {
            let opts = build_options(&cli)?;
            let out = cli
                .out
                .as_ref()
                .ok_or_else(|| Error::Usage("synth requires --out <dir>".into()))?;
            let spec = SynthSpec {
                images: *images,
                gt_poses: *poses,
                gt_masks: *masks,
                gt_crowds: *crowds,
                jitter_px: *jitter,
                duplicates: *duplicates,
                duplicate_score: *duplicate_score,
                far_fps: *far_fp,
                fp_score: *fp_score,
                perfect_score: *perfect_score,
                seed: cli.seed,
                width: *width,
                height: *height,
            };
            let scenes = generate_scenes(&spec, &opts.sigmas)?;
            std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
            let gt_path = out.join("gt.json");
            let dt_path = out.join("dt.json");
            std::fs::write(&gt_path, scenes_to_gt_json(&scenes).to_string())
                .map_err(|e| Error::io(&gt_path, e))?;
            std::fs::write(&dt_path, scenes_to_results_json(&scenes).to_string())
                .map_err(|e| Error::io(&dt_path, e))?;
            eprintln!("wrote {}", gt_path.display());
            eprintln!("wrote {}", dt_path.display());
            let detections: usize = scenes.iter().map(|s| s.detections.len()).sum();
            println!(
                "{}",
                serde_json::json!({
                    "gt": gt_path.display().to_string(),
                    "dt": dt_path.display().to_string(),
                    "images": scenes.len(),
                    "detections": detections,
                    "seed": cli.seed,
                })
            );
            Ok(())
        }
    }
}
