//! Pose-matching similarities.
//!
//! Four Gaussian-kernel similarities share the form
//! `exp(-d^2 / (2 s^2 k_n^2))` averaged over keypoints; they differ in how
//! the distance d is measured:
//!
//! * pose: keypoint-to-keypoint distance, averaged over GT keypoints with
//!   visibility > 0 (v = 0 means unlabeled and is excluded; this follows the
//!   COCO reading of the visibility gate),
//! * bbox: distance to the GT box boundary (0 inside), all N keypoints,
//! * mask / crowd: distance to the nearest mask pixel, scaled by the
//!   keypoint's share of the total detection confidence, all N keypoints.
//!
//! All values live in [0, 1]; the pair cost is 1 - similarity.

use crate::dataset::{DetectionPose, GroundTruthEntry, GtKeypoint, GtTarget, SigmaTable};
use crate::mask::{BBox, BinaryMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityKind {
    PoseOks,
    BboxOks,
    MaskOks,
    CrowdOks,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityScore {
    pub value: f64,
    pub kind: SimilarityKind,
}

fn kernel(distance: f64, scale: f64, k: f64) -> f64 {
    (-(distance * distance) / (2.0 * scale * scale * k * k)).exp()
}

/// Keypoint similarity against an annotated pose. Returns 0 when the GT has
/// no labeled keypoints (prevented upstream by the demotion rule).
pub fn oks_pose(
    det: &DetectionPose,
    gt_keypoints: &[GtKeypoint],
    scale: f64,
    sigmas: &SigmaTable,
) -> f64 {
    let mut sum = 0.0;
    let mut labeled = 0usize;
    for (n, gt) in gt_keypoints.iter().enumerate() {
        if !gt.is_labeled() {
            continue;
        }
        let d = &det.keypoints[n];
        let dist = ((d.x - gt.x).powi(2) + (d.y - gt.y).powi(2)).sqrt();
        sum += kernel(dist, scale, sigmas.k(n));
        labeled += 1;
    }
    if labeled == 0 {
        return 0.0;
    }
    sum / labeled as f64
}

/// Keypoint similarity against a bare bounding box: all N keypoints, no
/// confidence weighting.
pub fn oks_bbox(det: &DetectionPose, bbox: &BBox, scale: f64, sigmas: &SigmaTable) -> f64 {
    let n = det.keypoints.len();
    let sum: f64 = det
        .keypoints
        .iter()
        .enumerate()
        .map(|(i, kp)| kernel(bbox.distance_to(kp.x, kp.y), scale, sigmas.k(i)))
        .sum();
    sum / n as f64
}

/// Keypoint similarity against a pixel mask with confidence weighting: the
/// raw mask distance is multiplied by c_n / sum(c), so low-confidence
/// keypoints off the mask barely count. Zero total confidence falls back to
/// uniform weights. An empty mask yields the infinity sentinel: weighted
/// terms become 0, zero-weight terms become 1 (inf * 0 := 0).
pub fn oks_mask(det: &DetectionPose, mask: &BinaryMask, scale: f64, sigmas: &SigmaTable) -> f64 {
    let n = det.keypoints.len();
    let conf_total: f64 = det.keypoints.iter().map(|k| k.confidence).sum();
    let uniform = 1.0 / n as f64;
    let sum: f64 = det
        .keypoints
        .iter()
        .enumerate()
        .map(|(i, kp)| {
            let weight = if conf_total > 0.0 {
                kp.confidence / conf_total
            } else {
                uniform
            };
            let raw = mask.distance_to(kp.x, kp.y);
            if raw.is_infinite() {
                if weight > 0.0 {
                    0.0
                } else {
                    1.0
                }
            } else {
                kernel(raw * weight, scale, sigmas.k(i))
            }
        })
        .sum();
    sum / n as f64
}

/// Crowd-mask similarity; same definition as [`oks_mask`].
pub fn oks_crowd(det: &DetectionPose, mask: &BinaryMask, scale: f64, sigmas: &SigmaTable) -> f64 {
    oks_mask(det, mask, scale, sigmas)
}

/// Similarity of a detection against any GT entry, tagged with its kind.
pub fn similarity(
    det: &DetectionPose,
    gt: &GroundTruthEntry,
    sigmas: &SigmaTable,
) -> SimilarityScore {
    let scale = gt.scale();
    match &gt.target {
        GtTarget::Pose { keypoints } => SimilarityScore {
            value: oks_pose(det, keypoints, scale, sigmas),
            kind: SimilarityKind::PoseOks,
        },
        GtTarget::Mask { mask } => SimilarityScore {
            value: oks_mask(det, mask, scale, sigmas),
            kind: SimilarityKind::MaskOks,
        },
        GtTarget::CrowdMask { mask } => SimilarityScore {
            value: oks_crowd(det, mask, scale, sigmas),
            kind: SimilarityKind::CrowdOks,
        },
    }
}

/// Transport cost of pairing a detection with a GT entry: 1 - similarity.
pub fn pair_cost(det: &DetectionPose, gt: &GroundTruthEntry, sigmas: &SigmaTable) -> f64 {
    1.0 - similarity(det, gt, sigmas).value
}
