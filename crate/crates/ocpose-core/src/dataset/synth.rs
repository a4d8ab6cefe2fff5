//! Synthetic scene generation for tests and desk-scale experiments.
//!
//! Scenes are reproducible: the same spec and seed produce identical scenes.
//! Ground-truth entities are laid out on a shuffled grid so poses never
//! overlap masks; "perfect" detections copy the GT keypoints with confidence
//! one, and perturbations add jittered duplicates and far false positives
//! whose pair cost against every GT rounds to exactly 1.0.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mask::{BBox, BinaryMask};

use super::{
    DetKeypoint, DetectionPose, GroundTruthEntry, GtKeypoint, GtTarget, Scene, SigmaTable,
};

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub images: usize,
    pub gt_poses: usize,
    pub gt_masks: usize,
    pub gt_crowds: usize,
    /// Uniform jitter (pixels) applied to duplicate detections.
    pub jitter_px: f64,
    pub duplicates: usize,
    pub duplicate_score: f64,
    pub far_fps: usize,
    pub fp_score: f64,
    /// Instance score of the perfect detections.
    pub perfect_score: f64,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            images: 1,
            gt_poses: 3,
            gt_masks: 0,
            gt_crowds: 0,
            jitter_px: 0.0,
            duplicates: 0,
            duplicate_score: 0.5,
            far_fps: 0,
            fp_score: 0.05,
            perfect_score: 0.9,
            seed: 7,
            width: 640,
            height: 640,
        }
    }
}

/// Minimum distance (pixels) a false positive must keep from a GT so its
/// pair cost is exactly 1.0 in f64: every OKS term must fall below the 2^-53
/// rounding threshold. Mask distances are divided by N through the
/// confidence weights, hence the extra factor.
fn fp_margin(gt: &GroundTruthEntry, sigmas: &SigmaTable) -> f64 {
    let base = match gt.target {
        GtTarget::Pose { .. } => 20.0 * sigmas.max_k(),
        _ => 20.0 * sigmas.max_k() * sigmas.len() as f64,
    };
    base.max(10.0) * gt.scale()
}

/// True when (x, y) is far enough from every GT for a detection placed there
/// to cost exactly 1 against the whole scene.
pub fn far_from_all_gts(scene: &Scene, sigmas: &SigmaTable, x: f64, y: f64) -> bool {
    scene.gts.iter().all(|gt| {
        let margin = fp_margin(gt, sigmas);
        match &gt.target {
            GtTarget::Pose { keypoints } => keypoints
                .iter()
                .all(|kp| ((kp.x - x).powi(2) + (kp.y - y).powi(2)).sqrt() >= margin),
            GtTarget::Mask { mask } | GtTarget::CrowdMask { mask } => {
                mask.distance_to(x, y) >= margin
            }
        }
    })
}

/// Build one far-false-positive detection: all keypoints stacked on a point
/// that clears the margin against every GT in the scene.
pub fn make_far_fp(
    scene: &Scene,
    sigmas: &SigmaTable,
    rng: &mut impl Rng,
    fp_score: f64,
) -> Result<DetectionPose> {
    for _ in 0..1000 {
        let x = rng.random_range(0.0..scene.width as f64);
        let y = rng.random_range(0.0..scene.height as f64);
        if far_from_all_gts(scene, sigmas, x, y) {
            let keypoints = (0..sigmas.len())
                .map(|_| DetKeypoint {
                    x,
                    y,
                    confidence: 1.0,
                })
                .collect();
            return Ok(DetectionPose {
                image_id: scene.image_id,
                keypoints,
                score: fp_score,
            });
        }
    }
    Err(Error::Generation(format!(
        "no far false-positive placement found in {}x{} after 1000 tries",
        scene.width, scene.height
    )))
}

fn rect_mask(height: usize, width: usize, x0: usize, y0: usize, w: usize, h: usize) -> BinaryMask {
    let mut data = vec![0u8; height * width];
    for y in y0..(y0 + h).min(height) {
        for x in x0..(x0 + w).min(width) {
            data[y * width + x] = 1;
        }
    }
    BinaryMask::from_pixels(height, width, data).expect("rect mask dims")
}

/// Generate one scene. Deterministic in (spec, image_id).
pub fn generate_scene(spec: &SynthSpec, sigmas: &SigmaTable, image_id: i64) -> Result<Scene> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(spec.seed ^ (image_id as u64).wrapping_mul(0x9e3779b97f4a7c15));
    let skeleton = sigmas.len();
    let entities = spec.gt_poses + spec.gt_masks + spec.gt_crowds;
    if spec.duplicates > 0 && spec.gt_poses == 0 {
        return Err(Error::Generation(
            "duplicate detections require at least one GT pose".into(),
        ));
    }

    let mut scene = Scene {
        image_id,
        height: spec.height,
        width: spec.width,
        gts: Vec::new(),
        detections: Vec::new(),
    };

    if entities > 0 {
        let grid = (entities as f64).sqrt().ceil() as usize;
        let cell_w = spec.width / grid;
        let cell_h = spec.height / grid;
        if cell_w < 8 || cell_h < 8 {
            return Err(Error::Generation(format!(
                "image {}x{} too small for {entities} entities",
                spec.width, spec.height
            )));
        }
        let mut cells: Vec<(usize, usize)> =
            (0..grid * grid).map(|i| (i % grid, i / grid)).collect();
        cells.shuffle(&mut rng);

        for (e, &(cx, cy)) in cells.iter().enumerate().take(entities) {
            let x0 = cx * cell_w;
            let y0 = cy * cell_h;
            if e < spec.gt_poses {
                let center_x = (x0 + cell_w / 2) as f64;
                let center_y = (y0 + cell_h / 2) as f64;
                // small absolute spread keeps the scale s (and with it the
                // far-FP margin) independent of the image size
                let radius = ((cell_w.min(cell_h) as f64) * 0.25).min(6.0);
                let keypoints: Vec<GtKeypoint> = (0..skeleton)
                    .map(|_| GtKeypoint {
                        x: center_x + rng.random_range(-radius..=radius),
                        y: center_y + rng.random_range(-radius..=radius),
                        visibility: if rng.random_range(0.0..1.0) < 0.2 {
                            1
                        } else {
                            2
                        },
                    })
                    .collect();
                let min_x = keypoints.iter().map(|k| k.x).fold(f64::INFINITY, f64::min);
                let max_x = keypoints
                    .iter()
                    .map(|k| k.x)
                    .fold(f64::NEG_INFINITY, f64::max);
                let min_y = keypoints.iter().map(|k| k.y).fold(f64::INFINITY, f64::min);
                let max_y = keypoints
                    .iter()
                    .map(|k| k.y)
                    .fold(f64::NEG_INFINITY, f64::max);
                let bbox = BBox::new(
                    min_x - 1.0,
                    min_y - 1.0,
                    (max_x - min_x) + 2.0,
                    (max_y - min_y) + 2.0,
                );
                scene.gts.push(GroundTruthEntry {
                    id: scene.gts.len() as i64 + 1,
                    target: GtTarget::Pose { keypoints },
                    bbox: Some(bbox),
                    area: bbox.w * bbox.h,
                });
            } else {
                let crowd = e >= spec.gt_poses + spec.gt_masks;
                let frac = if crowd { 0.6 } else { 0.4 };
                let cap = if crowd { 24 } else { 16 };
                let mw = ((cell_w as f64 * frac) as usize).clamp(4, cap);
                let mh = ((cell_h as f64 * frac) as usize).clamp(4, cap);
                let mx = x0 + (cell_w - mw) / 2;
                let my = y0 + (cell_h - mh) / 2;
                let mask = rect_mask(spec.height, spec.width, mx, my, mw, mh);
                let area = mask.area() as f64;
                let bbox = mask.tight_bbox();
                scene.gts.push(GroundTruthEntry {
                    id: scene.gts.len() as i64 + 1,
                    target: if crowd {
                        GtTarget::CrowdMask { mask }
                    } else {
                        GtTarget::Mask { mask }
                    },
                    bbox,
                    area,
                });
            }
        }
    }

    // Perfect detections: exact copies of each GT pose.
    let mut perfects: Vec<DetectionPose> = Vec::new();
    for gt in &scene.gts {
        if let GtTarget::Pose { keypoints } = &gt.target {
            perfects.push(DetectionPose {
                image_id,
                keypoints: keypoints
                    .iter()
                    .map(|k| DetKeypoint {
                        x: k.x,
                        y: k.y,
                        confidence: 1.0,
                    })
                    .collect(),
                score: spec.perfect_score,
            });
        }
    }
    scene.detections.extend(perfects.iter().cloned());

    for _ in 0..spec.duplicates {
        let src = &perfects[rng.random_range(0..perfects.len())];
        let mut dup = src.clone();
        if spec.jitter_px > 0.0 {
            for kp in &mut dup.keypoints {
                kp.x += rng.random_range(-spec.jitter_px..=spec.jitter_px);
                kp.y += rng.random_range(-spec.jitter_px..=spec.jitter_px);
            }
        }
        dup.score = spec.duplicate_score;
        scene.detections.push(dup);
    }

    for _ in 0..spec.far_fps {
        let fp = make_far_fp(&scene, sigmas, &mut rng, spec.fp_score)?;
        scene.detections.push(fp);
    }

    // Same ordering contract as the loader: descending score, stable.
    scene.detections.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    Ok(scene)
}

/// Generate `spec.images` scenes with image ids 1..=images.
pub fn generate_scenes(spec: &SynthSpec, sigmas: &SigmaTable) -> Result<Vec<Scene>> {
    (1..=spec.images as i64)
        .map(|id| generate_scene(spec, sigmas, id))
        .collect()
}
