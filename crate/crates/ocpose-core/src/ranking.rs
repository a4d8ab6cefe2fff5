//! Confidence-ranked keypoint mAP baseline.
//!
//! Detections are ranked by score and greedily matched to GT poses; a
//! detection whose best unmatched pose clears the OKS threshold is a true
//! positive, one that lands on an ignore region (mask or crowd) is dropped
//! from scoring, and everything else is a false positive. Interpolated
//! average precision over the ranked pool, averaged over OKS thresholds
//! 0.50..0.95, gives mAP.

use crate::dataset::{GtTarget, Scene, SigmaTable};
use crate::error::{Error, Result};
use crate::matcher::{aggregate_plans, solve_transport, CostMatrix};
use crate::similarity::{oks_bbox, oks_mask, oks_pose};

/// OKS thresholds of the standard mAP average: 0.50, 0.55, ..., 0.95.
pub fn standard_oks_thresholds() -> Vec<f64> {
    (10..=19).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetLabel {
    /// Matched a GT pose at or above the threshold.
    Tp {
        gt: usize,
    },
    Fp,
    /// Landed on an ignore region; removed before ranking.
    Ignored,
}

/// How ignore regions are scored: against the pixel mask, or against the
/// entry's bounding box (the legacy behavior masks were introduced to fix).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IgnoreMode {
    #[default]
    Mask,
    LegacyBbox,
}

/// One pooled, scoreable detection outcome.
#[derive(Debug, Clone, Copy)]
pub struct ScoredLabel {
    pub image_id: i64,
    pub score: f64,
    pub label: DetLabel,
    /// Global input order, used to break score ties deterministically.
    pub order: usize,
}

/// Label each detection of a scene at one OKS threshold. Detections are
/// processed in descending score (ties by input order); each claims its
/// highest-OKS unmatched GT pose and succeeds if that OKS meets the
/// threshold. Each GT pose is claimed at most once.
pub fn greedy_match(
    scene: &Scene,
    oks_threshold: f64,
    sigmas: &SigmaTable,
    mode: IgnoreMode,
    bbox_expand: f64,
) -> Vec<DetLabel> {
    let mut order: Vec<usize> = (0..scene.detections.len()).collect();
    order.sort_by(|&a, &b| {
        scene.detections[b]
            .score
            .partial_cmp(&scene.detections[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let pose_indices: Vec<usize> = scene
        .gts
        .iter()
        .enumerate()
        .filter(|(_, g)| matches!(g.target, GtTarget::Pose { .. }))
        .map(|(i, _)| i)
        .collect();
    let mut pose_taken = vec![false; scene.gts.len()];
    let mut labels = vec![DetLabel::Fp; scene.detections.len()];

    for &d in &order {
        let det = &scene.detections[d];
        let mut best: Option<(f64, usize)> = None;
        for &g in &pose_indices {
            if pose_taken[g] {
                continue;
            }
            let gt = &scene.gts[g];
            let keypoints = gt.keypoints().expect("pose entry");
            let oks = oks_pose(det, keypoints, gt.scale(), sigmas);
            if best.is_none_or(|(b, _)| oks > b) {
                best = Some((oks, g));
            }
        }
        if let Some((oks, g)) = best {
            if oks >= oks_threshold {
                pose_taken[g] = true;
                labels[d] = DetLabel::Tp { gt: g };
                continue;
            }
        }
        let ignored = scene.gts.iter().any(|gt| match &gt.target {
            GtTarget::Mask { mask } | GtTarget::CrowdMask { mask } => {
                let oks = match (mode, gt.bbox) {
                    (IgnoreMode::LegacyBbox, Some(bbox)) => {
                        oks_bbox(det, &bbox.expand(bbox_expand), gt.scale(), sigmas)
                    }
                    _ => oks_mask(det, mask, gt.scale(), sigmas),
                };
                oks >= oks_threshold
            }
            GtTarget::Pose { .. } => false,
        });
        labels[d] = if ignored {
            DetLabel::Ignored
        } else {
            DetLabel::Fp
        };
    }
    labels
}

/// Pool the labels of many scenes, tagging each with score and global input
/// order for ranking.
pub fn pooled_labels(
    scenes: &[Scene],
    oks_threshold: f64,
    sigmas: &SigmaTable,
    mode: IgnoreMode,
    bbox_expand: f64,
) -> Vec<ScoredLabel> {
    let mut out = Vec::new();
    let mut order = 0usize;
    for scene in scenes {
        let labels = greedy_match(scene, oks_threshold, sigmas, mode, bbox_expand);
        for (d, label) in labels.into_iter().enumerate() {
            out.push(ScoredLabel {
                image_id: scene.image_id,
                score: scene.detections[d].score,
                label,
                order,
            });
            order += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ApInterpolation {
    /// Exact area under the non-increasing precision envelope.
    #[default]
    Envelope,
    /// COCO-style sampling of the envelope at 101 recall points.
    Points101,
}

/// Ranked precision/recall curve and its area.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PrCurve {
    pub oks_threshold: f64,
    /// (recall, precision) after each ranked detection.
    pub samples: Vec<(f64, f64)>,
    pub ap: f64,
    pub tp_count: usize,
    pub fp_count: usize,
}

/// Interpolated average precision over pooled labels. Ignored detections are
/// removed before ranking. Conventions: no GT and no scored detections gives
/// AP 1, no GT with scored detections gives AP 0.
pub fn average_precision(
    labels: &[ScoredLabel],
    gt_pose_count: usize,
    oks_threshold: f64,
    interpolation: ApInterpolation,
) -> PrCurve {
    let mut ranked: Vec<&ScoredLabel> = labels
        .iter()
        .filter(|l| l.label != DetLabel::Ignored)
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.order.cmp(&b.order))
    });

    let mut samples = Vec::with_capacity(ranked.len());
    let mut tp = 0usize;
    let mut fp = 0usize;
    for label in &ranked {
        match label.label {
            DetLabel::Tp { .. } => tp += 1,
            DetLabel::Fp => fp += 1,
            DetLabel::Ignored => unreachable!(),
        }
        let recall = if gt_pose_count == 0 {
            0.0
        } else {
            tp as f64 / gt_pose_count as f64
        };
        let precision = tp as f64 / (tp + fp) as f64;
        samples.push((recall, precision));
    }

    let ap = if gt_pose_count == 0 {
        if ranked.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        interpolated_ap(&samples, interpolation)
    };

    PrCurve {
        oks_threshold,
        samples,
        ap,
        tp_count: tp,
        fp_count: fp,
    }
}

fn interpolated_ap(samples: &[(f64, f64)], interpolation: ApInterpolation) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    // precision envelope: non-increasing from right to left
    let mut envelope: Vec<(f64, f64)> = samples.to_vec();
    for i in (0..envelope.len() - 1).rev() {
        envelope[i].1 = envelope[i].1.max(envelope[i + 1].1);
    }
    match interpolation {
        ApInterpolation::Envelope => {
            let mut ap = 0.0;
            let mut prev_recall = 0.0;
            for &(recall, precision) in &envelope {
                ap += (recall - prev_recall) * precision;
                prev_recall = recall;
            }
            ap
        }
        ApInterpolation::Points101 => {
            let mut ap = 0.0;
            for i in 0..=100 {
                let r = i as f64 / 100.0;
                // first envelope point with recall >= r (recalls are sorted)
                let p = envelope
                    .iter()
                    .find(|&&(recall, _)| recall >= r)
                    .map_or(0.0, |&(_, precision)| precision);
                ap += p;
            }
            ap / 101.0
        }
    }
}

/// mAP over the given OKS thresholds plus the per-threshold curves.
pub fn mean_average_precision(
    scenes: &[Scene],
    sigmas: &SigmaTable,
    oks_thresholds: &[f64],
    interpolation: ApInterpolation,
    mode: IgnoreMode,
    bbox_expand: f64,
) -> (Vec<PrCurve>, f64) {
    let gt_pose_count: usize = scenes.iter().map(|s| s.gt_pose_count()).sum();
    let curves: Vec<PrCurve> = oks_thresholds
        .iter()
        .map(|&t| {
            let labels = pooled_labels(scenes, t, sigmas, mode, bbox_expand);
            average_precision(&labels, gt_pose_count, t, interpolation)
        })
        .collect();
    let map = if curves.is_empty() {
        0.0
    } else {
        curves.iter().map(|c| c.ap).sum::<f64>() / curves.len() as f64
    };
    (curves, map)
}

/// Before/after report of the false-positive injection experiment.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FpInjectionReport {
    pub injected: usize,
    pub map_before: f64,
    pub map_after: f64,
    pub ocpose_before: f64,
    pub ocpose_after: f64,
}

/// Append `count` far false positives (score strictly below every real
/// detection) across the scene set and evaluate both metrics before and
/// after. Ranked AP ignores the flood; the transport score pays for every
/// injected detection.
pub fn fp_injection_experiment(
    scenes: &[Scene],
    count: usize,
    fp_score: f64,
    sigmas: &SigmaTable,
    seed: u64,
) -> Result<FpInjectionReport> {
    use rand::SeedableRng;
    let min_real = scenes
        .iter()
        .flat_map(|s| s.detections.iter().map(|d| d.score))
        .fold(f64::INFINITY, f64::min);
    if count > 0 && fp_score >= min_real {
        return Err(Error::Usage(format!(
            "fp score {fp_score} must be strictly below every real detection score (min {min_real})"
        )));
    }

    let ocpose = |set: &[Scene]| {
        let plans: Vec<_> = set
            .iter()
            .map(|s| solve_transport(&CostMatrix::from_scene(s, sigmas), false))
            .collect();
        aggregate_plans(plans.iter()).pooled
    };
    let thresholds = standard_oks_thresholds();
    let map = |set: &[Scene]| {
        mean_average_precision(
            set,
            sigmas,
            &thresholds,
            ApInterpolation::Envelope,
            IgnoreMode::Mask,
            1.0,
        )
        .1
    };

    let map_before = map(scenes);
    let ocpose_before = ocpose(scenes);

    let mut injected = scenes.to_vec();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        let scene_idx = i % injected.len();
        let fp = crate::dataset::make_far_fp(&injected[scene_idx], sigmas, &mut rng, fp_score)?;
        injected[scene_idx].detections.push(fp);
    }

    Ok(FpInjectionReport {
        injected: count,
        map_before,
        map_after: map(&injected),
        ocpose_before,
        ocpose_after: ocpose(&injected),
    })
}
