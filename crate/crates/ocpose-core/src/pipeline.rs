//! End-to-end evaluation flows: evaluate, sweep, PR curves, compare.
//!
//! Per-image work (cost matrix, transport solve, greedy labeling) is
//! embarrassingly parallel; with the `parallel` feature it fans out over a
//! rayon pool sized by `jobs`, and all reductions run in image-id order so
//! results are identical however the work was scheduled. Without the
//! feature everything runs on the sequential fallback.

use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::dataset::{
    attach_detections, load_detections, load_ground_truth, DetLoadSummary, GtLoadSummary, Scene,
    SigmaTable,
};
use crate::error::{Error, Result};
use crate::matcher::{aggregate_plans, solve_transport, CostMatrix, DetSide, GtSide, MatchPlan};
use crate::ranking::{
    average_precision, greedy_match, standard_oks_thresholds, ApInterpolation, DetLabel,
    IgnoreMode, ScoredLabel,
};
use crate::report::{
    AggregateReport, ApPoint, CompareResult, CompareRow, ConfigEcho, EvaluationReport, ImageReport,
    MatchedPairOut, PrCurveSet, SweepPoint, SweepResult, ToolInfo, SCHEMA_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    PerImageMean,
    #[default]
    Pooled,
}

impl Aggregation {
    pub fn name(&self) -> &'static str {
        match self {
            Aggregation::PerImageMean => "per-image",
            Aggregation::Pooled => "pooled",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub threshold: f64,
    pub sigmas: SigmaTable,
    pub bbox_expand: f64,
    pub exclude_crowd_matches: bool,
    pub aggregation: Aggregation,
    /// Worker bound: 0 uses the default pool, 1 forces the sequential path.
    pub jobs: usize,
    pub oks_thresholds: Vec<f64>,
    pub interpolation: ApInterpolation,
    pub ignore_mode: IgnoreMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            threshold: 0.0,
            sigmas: SigmaTable::coco17(),
            bbox_expand: 1.0,
            exclude_crowd_matches: false,
            aggregation: Aggregation::Pooled,
            jobs: 0,
            oks_thresholds: standard_oks_thresholds(),
            interpolation: ApInterpolation::Envelope,
            ignore_mode: IgnoreMode::Mask,
        }
    }
}

impl EvalOptions {
    fn config_echo(&self, gt_path: &str, dt_path: &str) -> ConfigEcho {
        ConfigEcho {
            gt_path: gt_path.to_string(),
            dt_path: dt_path.to_string(),
            threshold: self.threshold,
            sigma_table_hash: self.sigmas.hash_hex(),
            skeleton: self.sigmas.len(),
            bbox_expand: self.bbox_expand,
            exclude_crowd_matches: self.exclude_crowd_matches,
            aggregation: self.aggregation.name().to_string(),
            jobs: self.jobs,
            oks_thresholds: self.oks_thresholds.clone(),
            ap_interpolation: match self.interpolation {
                ApInterpolation::Envelope => "envelope".to_string(),
                ApInterpolation::Points101 => "101-point".to_string(),
            },
            ignore_mode: match self.ignore_mode {
                IgnoreMode::Mask => "mask".to_string(),
                IgnoreMode::LegacyBbox => "legacy-bbox".to_string(),
            },
        }
    }
}

/// Everything computed for one image.
struct SceneOutcome {
    plan: MatchPlan,
    /// Greedy labels per OKS threshold, detection order.
    labels: Vec<Vec<DetLabel>>,
    /// Cost-matrix column -> scene GT index maps, for reporting.
    non_crowd_src: Vec<usize>,
    crowd_src: Vec<usize>,
}

fn evaluate_one(scene: &Scene, opts: &EvalOptions) -> SceneOutcome {
    let matrix = CostMatrix::from_scene(scene, &opts.sigmas);
    let plan = solve_transport(&matrix, opts.exclude_crowd_matches);
    let labels = opts
        .oks_thresholds
        .iter()
        .map(|&t| greedy_match(scene, t, &opts.sigmas, opts.ignore_mode, opts.bbox_expand))
        .collect();
    SceneOutcome {
        plan,
        labels,
        non_crowd_src: matrix.non_crowd_src,
        crowd_src: matrix.crowd_src,
    }
}

fn outcomes_sequential(scenes: &[Scene], opts: &EvalOptions) -> Vec<SceneOutcome> {
    scenes.iter().map(|s| evaluate_one(s, opts)).collect()
}

#[cfg(feature = "parallel")]
fn outcomes_parallel(scenes: &[Scene], opts: &EvalOptions) -> Vec<SceneOutcome> {
    let run = || scenes.par_iter().map(|s| evaluate_one(s, opts)).collect();
    if opts.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .expect("thread pool")
            .install(run)
    } else {
        run()
    }
}

fn outcomes(scenes: &[Scene], opts: &EvalOptions) -> Vec<SceneOutcome> {
    #[cfg(feature = "parallel")]
    {
        if opts.jobs != 1 {
            return outcomes_parallel(scenes, opts);
        }
    }
    outcomes_sequential(scenes, opts)
}

fn assemble_report(
    scenes: &[Scene],
    outcomes: Vec<SceneOutcome>,
    opts: &EvalOptions,
    gt_path: &str,
    dt_path: &str,
) -> EvaluationReport {
    let mut per_image = Vec::with_capacity(scenes.len());
    for (scene, outcome) in scenes.iter().zip(&outcomes) {
        let matched_pairs = outcome
            .plan
            .matched_pairs()
            .map(|p| {
                let det = match p.det {
                    DetSide::Real(i) => i,
                    DetSide::Dummy => unreachable!("matched_pairs yields real detections"),
                };
                let gt_idx = match p.gt {
                    GtSide::NonCrowd(c) => outcome.non_crowd_src[c],
                    GtSide::Crowd(c) => outcome.crowd_src[c],
                    GtSide::Dummy => unreachable!(),
                };
                let gt_entry = &scene.gts[gt_idx];
                MatchedPairOut {
                    det,
                    gt: gt_entry.id,
                    gt_kind: match gt_entry.kind() {
                        crate::dataset::GtKind::Pose => "pose",
                        crate::dataset::GtKind::Mask => "mask",
                        crate::dataset::GtKind::CrowdMask => "crowd_mask",
                    },
                    cost: p.cost,
                }
            })
            .collect();
        per_image.push(ImageReport {
            image_id: scene.image_id,
            ocpose: outcome.plan.ocpose,
            pi_one: outcome.plan.pi_one_count,
            pi_one_cost: outcome.plan.pi_one_cost,
            fp: outcome.plan.false_positives,
            fn_count: outcome.plan.false_negatives,
            matched_pairs,
        });
    }

    let agg = aggregate_plans(outcomes.iter().map(|o| &o.plan));

    // pooled ranking labels in fixed scene order
    let gt_poses: usize = scenes.iter().map(|s| s.gt_pose_count()).sum();
    let mut ap_per_threshold = Vec::with_capacity(opts.oks_thresholds.len());
    for (ti, &threshold) in opts.oks_thresholds.iter().enumerate() {
        let mut pooled: Vec<ScoredLabel> = Vec::new();
        let mut order = 0usize;
        for (scene, outcome) in scenes.iter().zip(&outcomes) {
            for (d, &label) in outcome.labels[ti].iter().enumerate() {
                pooled.push(ScoredLabel {
                    image_id: scene.image_id,
                    score: scene.detections[d].score,
                    label,
                    order,
                });
                order += 1;
            }
        }
        let curve = average_precision(&pooled, gt_poses, threshold, opts.interpolation);
        ap_per_threshold.push(ApPoint {
            oks_threshold: threshold,
            ap: curve.ap,
        });
    }
    let map = if ap_per_threshold.is_empty() {
        0.0
    } else {
        ap_per_threshold.iter().map(|p| p.ap).sum::<f64>() / ap_per_threshold.len() as f64
    };

    let aggregate = AggregateReport {
        ocpose_per_image_mean: agg.per_image_mean,
        ocpose_pooled: agg.pooled,
        map,
        ap_per_threshold,
        total_fp: per_image.iter().map(|i| i.fp).sum(),
        total_fn: per_image.iter().map(|i| i.fn_count).sum(),
        images: scenes.len(),
        detections: scenes.iter().map(|s| s.detections.len()).sum(),
        gt_poses,
    };

    EvaluationReport {
        schema_version: SCHEMA_VERSION,
        tool: ToolInfo::default(),
        config: opts.config_echo(gt_path, dt_path),
        per_image,
        aggregate,
    }
}

/// Evaluate in-memory scenes (detections already filtered).
pub fn evaluate_scenes(scenes: &[Scene], opts: &EvalOptions) -> EvaluationReport {
    let out = outcomes(scenes, opts);
    assemble_report(scenes, out, opts, "", "")
}

/// Sequential path, exposed for benchmarking against the parallel one.
pub fn evaluate_scenes_sequential(scenes: &[Scene], opts: &EvalOptions) -> EvaluationReport {
    let out = outcomes_sequential(scenes, opts);
    assemble_report(scenes, out, opts, "", "")
}

#[cfg(feature = "parallel")]
pub fn evaluate_scenes_parallel(scenes: &[Scene], opts: &EvalOptions) -> EvaluationReport {
    let out = outcomes_parallel(scenes, opts);
    assemble_report(scenes, out, opts, "", "")
}

/// Load GT and detections, attach, and evaluate.
pub fn evaluate_paths(
    gt_path: &Path,
    dt_path: &Path,
    opts: &EvalOptions,
) -> Result<(EvaluationReport, GtLoadSummary, DetLoadSummary)> {
    let (mut scenes, gt_summary) = load_ground_truth(gt_path, &opts.sigmas)?;
    let (dets, dt_summary) = load_detections(dt_path, opts.threshold, opts.sigmas.len())?;
    attach_detections(&mut scenes, dets)?;
    let out = outcomes(&scenes, opts);
    let report = assemble_report(
        &scenes,
        out,
        opts,
        &gt_path.display().to_string(),
        &dt_path.display().to_string(),
    );
    Ok((report, gt_summary, dt_summary))
}

/// The default sweep grid: 0.00 to 0.95 in steps of 0.01.
pub fn default_sweep_grid() -> Vec<f64> {
    (0..=95).map(|i| i as f64 / 100.0).collect()
}

/// Evaluate every grid threshold against one parsed detection set. The
/// detection file is parsed once and re-filtered per point; masks (and their
/// cached distance fields) are shared across all points.
pub fn sweep_paths(
    gt_path: &Path,
    dt_path: &Path,
    grid: &[f64],
    opts: &EvalOptions,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::Usage("sweep grid must not be empty".into()));
    }
    if let Some(bad) = grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Usage(format!(
            "sweep thresholds must lie in [0,1], got {bad}"
        )));
    }
    let (mut scenes, _) = load_ground_truth(gt_path, &opts.sigmas)?;
    let (dets, _) = load_detections(dt_path, 0.0, opts.sigmas.len())?;
    attach_detections(&mut scenes, dets)?;
    Ok(sweep_scenes(&mut scenes, grid, opts))
}

/// Sweep over scenes loaded at threshold zero. The scenes are mutated per
/// grid point and restored to the full detection set on return.
pub fn sweep_scenes(scenes: &mut [Scene], grid: &[f64], opts: &EvalOptions) -> SweepResult {
    let originals: Vec<Vec<crate::dataset::DetectionPose>> =
        scenes.iter().map(|s| s.detections.clone()).collect();
    let mut grid: Vec<f64> = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut points = Vec::with_capacity(grid.len());
    for &threshold in &grid {
        for (scene, original) in scenes.iter_mut().zip(&originals) {
            scene.detections = original
                .iter()
                .filter(|d| d.score >= threshold)
                .cloned()
                .collect();
        }
        let point_opts = EvalOptions {
            threshold,
            ..opts.clone()
        };
        let report = evaluate_scenes(scenes, &point_opts);
        points.push(SweepPoint {
            threshold,
            ocpose: report.aggregate.ocpose_pooled,
            map: report.aggregate.map,
            kept_detections: report.aggregate.detections,
        });
    }
    for (scene, original) in scenes.iter_mut().zip(originals) {
        scene.detections = original;
    }

    let mut best = &points[0];
    for point in &points[1..] {
        if point.ocpose < best.ocpose {
            best = point;
        }
    }
    SweepResult {
        argmin_threshold: best.threshold,
        argmin_ocpose: best.ocpose,
        grid: points,
    }
}

/// PR curves per confidence threshold, one curve per OKS threshold.
pub fn pr_curves_paths(
    gt_path: &Path,
    dt_path: &Path,
    confidence_thresholds: &[f64],
    opts: &EvalOptions,
) -> Result<Vec<PrCurveSet>> {
    if confidence_thresholds.is_empty() {
        return Err(Error::Usage(
            "at least one confidence threshold is required".into(),
        ));
    }
    let (mut scenes, _) = load_ground_truth(gt_path, &opts.sigmas)?;
    let (dets, _) = load_detections(dt_path, 0.0, opts.sigmas.len())?;
    attach_detections(&mut scenes, dets)?;

    let originals: Vec<Vec<crate::dataset::DetectionPose>> =
        scenes.iter().map(|s| s.detections.clone()).collect();
    let gt_poses: usize = scenes.iter().map(|s| s.gt_pose_count()).sum();

    let mut sets = Vec::new();
    for &tc in confidence_thresholds {
        for (scene, original) in scenes.iter_mut().zip(&originals) {
            scene.detections = original.iter().filter(|d| d.score >= tc).cloned().collect();
        }
        let out = outcomes(&scenes, opts);
        let mut curves = Vec::with_capacity(opts.oks_thresholds.len());
        for (ti, &threshold) in opts.oks_thresholds.iter().enumerate() {
            let mut pooled: Vec<ScoredLabel> = Vec::new();
            let mut order = 0usize;
            for (scene, outcome) in scenes.iter().zip(&out) {
                for (d, &label) in outcome.labels[ti].iter().enumerate() {
                    pooled.push(ScoredLabel {
                        image_id: scene.image_id,
                        score: scene.detections[d].score,
                        label,
                        order,
                    });
                    order += 1;
                }
            }
            curves.push(average_precision(
                &pooled,
                gt_poses,
                threshold,
                opts.interpolation,
            ));
        }
        let map = curves.iter().map(|c| c.ap).sum::<f64>() / curves.len().max(1) as f64;
        sets.push(PrCurveSet {
            confidence_threshold: tc,
            kept_detections: scenes.iter().map(|s| s.detections.len()).sum(),
            map,
            curves,
        });
    }
    Ok(sets)
}

/// Evaluate several prediction files side by side and flag pairs the two
/// metrics rank differently.
pub fn compare_paths(
    gt_path: &Path,
    dt_paths: &[std::path::PathBuf],
    opts: &EvalOptions,
) -> Result<CompareResult> {
    if dt_paths.len() < 2 {
        return Err(Error::Usage(
            "compare needs at least two prediction files".into(),
        ));
    }
    let (scenes, _) = load_ground_truth(gt_path, &opts.sigmas)?;
    let mut rows = Vec::new();
    for dt_path in dt_paths {
        let mut method_scenes = scenes.clone();
        let (dets, _) = load_detections(dt_path, opts.threshold, opts.sigmas.len())?;
        attach_detections(&mut method_scenes, dets)?;
        let report = evaluate_scenes(&method_scenes, opts);
        let name = dt_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| dt_path.display().to_string());
        rows.push(CompareRow {
            name,
            map: report.aggregate.map,
            ocpose_pooled: report.aggregate.ocpose_pooled,
            ocpose_per_image_mean: report.aggregate.ocpose_per_image_mean,
            detections: report.aggregate.detections,
            total_fp: report.aggregate.total_fp,
        });
    }

    let mut disagreements = Vec::new();
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            let (ra, rb) = (&rows[a], &rows[b]);
            let flagged = (ra.map >= rb.map && ra.ocpose_pooled > rb.ocpose_pooled)
                || (rb.map >= ra.map && rb.ocpose_pooled > ra.ocpose_pooled);
            if flagged {
                disagreements.push([ra.name.clone(), rb.name.clone()]);
            }
        }
    }
    Ok(CompareResult {
        rank_disagreement: !disagreements.is_empty(),
        rows,
        disagreements,
    })
}
