//! Scene model and dataset I/O.
//!
//! Ground truth and detections are parsed from COCO-format JSON into
//! immutable [`Scene`] values. Scenes are plain data, `Send + Sync`, and
//! cheap to share across workers.

mod coco;
mod synth;

pub use coco::{
    attach_detections, load_detections, load_ground_truth, scenes_to_gt_json,
    scenes_to_results_json, DetLoadSummary, GtLoadSummary,
};
pub use synth::{far_from_all_gts, generate_scene, generate_scenes, make_far_fp, SynthSpec};

use crate::error::{Error, Result};
use crate::mask::{BBox, BinaryMask};

/// Per-joint constants k_n of the OKS kernel denominator 2*s^2*k_n^2.
///
/// The shipped defaults are the standard COCO 17-joint constants (twice the
/// published per-joint sigmas, matching the usual OKS variance convention).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct SigmaTable {
    k: Vec<f64>,
}

/// k_n for the 17 COCO joints: nose, eyes, ears, shoulders, elbows, wrists,
/// hips, knees, ankles.
pub const COCO_K: [f64; 17] = [
    0.052, 0.050, 0.050, 0.070, 0.070, 0.158, 0.158, 0.144, 0.144, 0.124, 0.124, 0.214, 0.214,
    0.174, 0.174, 0.178, 0.178,
];

impl SigmaTable {
    pub fn coco17() -> Self {
        SigmaTable { k: COCO_K.to_vec() }
    }

    pub fn from_constants(k: Vec<f64>) -> Result<Self> {
        if k.is_empty() {
            return Err(Error::Config("sigma table must not be empty".into()));
        }
        if let Some(bad) = k.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Config(format!(
                "sigma table entries must be finite and > 0, got {bad}"
            )));
        }
        Ok(SigmaTable { k })
    }

    /// Load a JSON list of floats.
    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let k: Vec<f64> = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("sigma file {}: {e}", path.display())))?;
        Self::from_constants(k)
    }

    /// Skeleton size: one constant per joint.
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn k(&self, joint: usize) -> f64 {
        self.k[joint]
    }

    pub fn max_k(&self) -> f64 {
        self.k.iter().copied().fold(0.0, f64::max)
    }

    /// FNV-1a over the IEEE-754 bytes, for the report's config echo.
    pub fn hash_hex(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for v in &self.k {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        format!("fnv1a:{h:016x}")
    }
}

/// Ground-truth keypoint: position plus COCO visibility (0 unlabeled,
/// 1 labeled occluded, 2 labeled visible).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtKeypoint {
    pub x: f64,
    pub y: f64,
    pub visibility: u8,
}

impl GtKeypoint {
    /// Keypoints with v > 0 participate in pose similarity; v = 0 means
    /// unlabeled and is excluded.
    pub fn is_labeled(&self) -> bool {
        self.visibility > 0
    }
}

/// Detected keypoint: position plus per-keypoint confidence in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetKeypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GtKind {
    Pose,
    Mask,
    CrowdMask,
}

/// What a ground-truth entry annotates: an individual pose, an individual
/// person with only a pixel mask, or a crowd region.
#[derive(Debug, Clone, PartialEq)]
pub enum GtTarget {
    Pose { keypoints: Vec<GtKeypoint> },
    Mask { mask: BinaryMask },
    CrowdMask { mask: BinaryMask },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEntry {
    pub id: i64,
    pub target: GtTarget,
    /// GT bounding box, kept for the legacy bbox similarity.
    pub bbox: Option<BBox>,
    /// Object area in pixels; the matching scale is sqrt(area).
    pub area: f64,
}

impl GroundTruthEntry {
    pub fn kind(&self) -> GtKind {
        match self.target {
            GtTarget::Pose { .. } => GtKind::Pose,
            GtTarget::Mask { .. } => GtKind::Mask,
            GtTarget::CrowdMask { .. } => GtKind::CrowdMask,
        }
    }

    /// Scale s of the OKS kernel.
    pub fn scale(&self) -> f64 {
        self.area.sqrt()
    }

    pub fn is_crowd(&self) -> bool {
        matches!(self.target, GtTarget::CrowdMask { .. })
    }

    pub fn mask(&self) -> Option<&BinaryMask> {
        match &self.target {
            GtTarget::Mask { mask } | GtTarget::CrowdMask { mask } => Some(mask),
            GtTarget::Pose { .. } => None,
        }
    }

    pub fn keypoints(&self) -> Option<&[GtKeypoint]> {
        match &self.target {
            GtTarget::Pose { keypoints } => Some(keypoints),
            _ => None,
        }
    }
}

/// One estimated pose: per-keypoint positions/confidences and an instance
/// confidence score.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionPose {
    pub image_id: i64,
    pub keypoints: Vec<DetKeypoint>,
    pub score: f64,
}

/// Everything known about one image: ground truth plus the detections kept
/// at the active confidence threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image_id: i64,
    pub height: usize,
    pub width: usize,
    pub gts: Vec<GroundTruthEntry>,
    pub detections: Vec<DetectionPose>,
}

impl Scene {
    pub fn gt_pose_count(&self) -> usize {
        self.gts.iter().filter(|g| g.kind() == GtKind::Pose).count()
    }
}

/// Drop detections below `threshold`, preserving order.
pub fn filter_detections(scenes: &mut [Scene], threshold: f64) {
    for scene in scenes {
        scene.detections.retain(|d| d.score >= threshold);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_table_rejects_nonpositive() {
        assert!(SigmaTable::from_constants(vec![0.1, 0.0]).is_err());
        assert!(SigmaTable::from_constants(vec![]).is_err());
        assert!(SigmaTable::from_constants(vec![0.1, f64::NAN]).is_err());
    }

    #[test]
    fn sigma_hash_stable() {
        let a = SigmaTable::coco17();
        let b = SigmaTable::coco17();
        assert_eq!(a.hash_hex(), b.hash_hex());
        let c = SigmaTable::from_constants(vec![0.1]).unwrap();
        assert_ne!(a.hash_hex(), c.hash_hex());
    }

    #[test]
    fn filter_monotone() {
        let det = |score: f64| DetectionPose {
            image_id: 1,
            keypoints: vec![],
            score,
        };
        let mut scenes = vec![Scene {
            image_id: 1,
            height: 10,
            width: 10,
            gts: vec![],
            detections: vec![det(0.9), det(0.5), det(0.1)],
        }];
        filter_detections(&mut scenes, 0.3);
        assert_eq!(scenes[0].detections.len(), 2);
        filter_detections(&mut scenes, 0.6);
        assert_eq!(scenes[0].detections.len(), 1);
    }
}
