//! COCO-format parsing and serialization.
//!
//! Accepts annotation JSON (`images` + `annotations`) and results JSON (a
//! flat array of keypoint detections). Segmentations may be polygon lists,
//! uncompressed RLE (`counts` as an integer list) or the compressed string
//! RLE used by the official COCO files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BBox, BinaryMask};

use super::{
    DetKeypoint, DetectionPose, GroundTruthEntry, GtKeypoint, GtTarget, Scene, SigmaTable,
};

#[derive(Debug, Deserialize, Serialize)]
struct GtDoc {
    #[serde(default)]
    images: Vec<ImageEntry>,
    #[serde(default)]
    annotations: Vec<AnnEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    categories: Vec<CategoryEntry>,
}

#[derive(Debug, Deserialize, Serialize)]
struct ImageEntry {
    id: i64,
    height: usize,
    width: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    file_name: Option<String>,
}

#[derive(Debug, Deserialize, Serialize)]
struct CategoryEntry {
    id: i64,
    name: String,
}

#[derive(Debug, Default, Deserialize, Serialize)]
struct AnnEntry {
    #[serde(default)]
    id: Option<i64>,
    image_id: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category_id: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keypoints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    num_keypoints: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbox: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segmentation: Option<Segmentation>,
    #[serde(default, deserialize_with = "deserialize_iscrowd")]
    iscrowd: bool,
}

fn deserialize_iscrowd<'de, D>(deserializer: D) -> std::result::Result<bool, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum IsCrowd {
        Bool(bool),
        Int(u8),
    }
    Ok(match Option::<IsCrowd>::deserialize(deserializer)? {
        Some(IsCrowd::Bool(b)) => b,
        Some(IsCrowd::Int(i)) => i != 0,
        None => false,
    })
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum Segmentation {
    Polygons(Vec<Vec<f64>>),
    Rle { size: [usize; 2], counts: RleCounts },
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum RleCounts {
    Ints(Vec<u64>),
    Text(String),
}

#[derive(Debug, Deserialize)]
struct DetEntry {
    image_id: i64,
    #[serde(default)]
    #[allow(dead_code)]
    category_id: Option<i64>,
    keypoints: Vec<f64>,
    #[serde(default)]
    score: Option<f64>,
}

/// What happened to each GT annotation during loading.
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct GtLoadSummary {
    pub images: usize,
    pub annotations: usize,
    pub poses: usize,
    pub masks: usize,
    pub crowd_masks: usize,
    /// Annotations with keypoints present but none labeled, kept as masks.
    pub demoted_to_mask: usize,
    pub dropped: usize,
    pub warnings: Vec<String>,
}

/// What happened to the detection file during loading.
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct DetLoadSummary {
    pub total: usize,
    pub kept: usize,
    pub below_threshold: usize,
    /// Entries with a missing or non-finite score.
    pub rejected_score: usize,
    pub warnings: Vec<String>,
}

fn parse_error(path: &Path, text: &str, err: &serde_json::Error) -> Error {
    let (line, column) = (err.line(), err.column());
    let mut offset = 0usize;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            offset += column.saturating_sub(1);
            return Error::Parse {
                path: path.to_path_buf(),
                message: err.to_string(),
                line,
                column,
                offset,
            };
        }
        offset += l.len();
    }
    Error::Parse {
        path: path.to_path_buf(),
        message: err.to_string(),
        line,
        column,
        offset: text.len(),
    }
}

/// Decode the COCO compressed RLE string into run counts.
///
/// Each count is a variable-length little-endian base-32 number stored in
/// chars offset by 48, with a continuation bit at 0x20 and sign extension at
/// 0x10; counts after the second are deltas from the count two positions back.
fn decode_rle_string(s: &str) -> Result<Vec<u64>> {
    let bytes = s.as_bytes();
    let mut counts: Vec<i64> = Vec::new();
    let mut p = 0usize;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0u32;
        loop {
            if p >= bytes.len() {
                return Err(Error::Decode("truncated compressed rle string".into()));
            }
            let c = (bytes[p] as i64) - 48;
            if !(0..64).contains(&c) {
                return Err(Error::Decode(format!(
                    "invalid compressed rle byte {:#x}",
                    bytes[p]
                )));
            }
            if 5 * (k + 1) >= 64 {
                return Err(Error::Decode("compressed rle count overflows".into()));
            }
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            let more = c & 0x20 != 0;
            if !more {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * (k + 1));
                }
                break;
            }
            k += 1;
        }
        if counts.len() > 2 {
            x += counts[counts.len() - 2];
        }
        counts.push(x);
    }
    counts
        .into_iter()
        .map(|c| u64::try_from(c).map_err(|_| Error::Decode(format!("negative rle count {c}"))))
        .collect()
}

fn decode_segmentation(
    seg: &Segmentation,
    image_size: (usize, usize),
    ann_id: i64,
) -> Result<BinaryMask> {
    match seg {
        Segmentation::Polygons(polys) => BinaryMask::rasterize_polygons(polys, image_size),
        Segmentation::Rle { size, counts } => {
            if (size[0], size[1]) != image_size {
                return Err(Error::Schema {
                    annotation_id: ann_id,
                    message: format!(
                        "rle size {:?} does not match image size {:?}",
                        size, image_size
                    ),
                });
            }
            let ints = match counts {
                RleCounts::Ints(v) => v.clone(),
                RleCounts::Text(s) => decode_rle_string(s)?,
            };
            BinaryMask::decode_rle(&ints, image_size)
        }
    }
}

fn parse_gt_keypoints(raw: &[f64], skeleton: usize, ann_id: i64) -> Result<Vec<GtKeypoint>> {
    if raw.len() != 3 * skeleton {
        return Err(Error::Schema {
            annotation_id: ann_id,
            message: format!(
                "keypoint array has {} values, expected {} (3 x {skeleton})",
                raw.len(),
                3 * skeleton
            ),
        });
    }
    raw.chunks_exact(3)
        .map(|kp| {
            let v = kp[2];
            if v != 0.0 && v != 1.0 && v != 2.0 {
                return Err(Error::Schema {
                    annotation_id: ann_id,
                    message: format!("visibility flag {v} not in {{0,1,2}}"),
                });
            }
            Ok(GtKeypoint {
                x: kp[0],
                y: kp[1],
                visibility: v as u8,
            })
        })
        .collect()
}

/// Parse a COCO annotation file into scenes (sorted by image id, detections
/// empty). Annotation kinds: iscrowd -> crowd mask; at least one labeled
/// keypoint -> pose; segmentation only -> mask; otherwise dropped.
pub fn load_ground_truth(path: &Path, sigmas: &SigmaTable) -> Result<(Vec<Scene>, GtLoadSummary)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: GtDoc = serde_json::from_str(&text).map_err(|e| parse_error(path, &text, &e))?;
    let skeleton = sigmas.len();

    let mut summary = GtLoadSummary {
        images: doc.images.len(),
        annotations: doc.annotations.len(),
        ..Default::default()
    };

    let mut images: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    for img in &doc.images {
        if images.insert(img.id, (img.height, img.width)).is_some() {
            summary
                .warnings
                .push(format!("duplicate image id {}, last entry wins", img.id));
        }
    }

    let missing: Vec<i64> = {
        let mut m: Vec<i64> = doc
            .annotations
            .iter()
            .filter(|a| !images.contains_key(&a.image_id))
            .map(|a| a.image_id)
            .collect();
        m.sort_unstable();
        m.dedup();
        m
    };
    if !missing.is_empty() {
        return Err(Error::Reference(missing));
    }

    let mut scenes: BTreeMap<i64, Scene> = images
        .iter()
        .map(|(&id, &(h, w))| {
            (
                id,
                Scene {
                    image_id: id,
                    height: h,
                    width: w,
                    gts: Vec::new(),
                    detections: Vec::new(),
                },
            )
        })
        .collect();

    for (index, ann) in doc.annotations.iter().enumerate() {
        let ann_id = ann.id.unwrap_or(index as i64 + 1);
        let image_size = images[&ann.image_id];

        let bbox = match ann.bbox.as_deref() {
            Some([x, y, w, h]) => Some(BBox::new(*x, *y, *w, *h)),
            Some(other) => {
                return Err(Error::Schema {
                    annotation_id: ann_id,
                    message: format!("bbox has {} values, expected 4", other.len()),
                })
            }
            None => None,
        };

        let area = match (ann.area, bbox) {
            (Some(a), _) if a > 0.0 => a,
            (_, Some(b)) if b.w * b.h > 0.0 => b.w * b.h,
            _ => {
                summary.dropped += 1;
                summary.warnings.push(format!(
                    "annotation {ann_id}: no positive area or bbox, dropped"
                ));
                continue;
            }
        };

        let keypoints = match ann.keypoints.as_deref() {
            Some(raw) => Some(parse_gt_keypoints(raw, skeleton, ann_id)?),
            None => None,
        };
        let labeled = keypoints
            .as_ref()
            .map_or(0, |kps| kps.iter().filter(|k| k.is_labeled()).count());

        let target = if ann.iscrowd {
            match ann.segmentation.as_ref() {
                Some(seg) => {
                    summary.crowd_masks += 1;
                    GtTarget::CrowdMask {
                        mask: decode_segmentation(seg, image_size, ann_id)?,
                    }
                }
                None => {
                    summary.dropped += 1;
                    summary.warnings.push(format!(
                        "annotation {ann_id}: iscrowd without segmentation, dropped"
                    ));
                    continue;
                }
            }
        } else if labeled > 0 {
            summary.poses += 1;
            GtTarget::Pose {
                keypoints: keypoints.unwrap(),
            }
        } else if let Some(seg) = ann.segmentation.as_ref() {
            if keypoints.is_some() {
                summary.demoted_to_mask += 1;
            }
            summary.masks += 1;
            GtTarget::Mask {
                mask: decode_segmentation(seg, image_size, ann_id)?,
            }
        } else {
            summary.dropped += 1;
            summary.warnings.push(format!(
                "annotation {ann_id}: no labeled keypoints and no segmentation, dropped"
            ));
            continue;
        };

        scenes
            .get_mut(&ann.image_id)
            .unwrap()
            .gts
            .push(GroundTruthEntry {
                id: ann_id,
                target,
                bbox,
                area,
            });
    }

    Ok((scenes.into_values().collect(), summary))
}

/// Parse a COCO results file, dropping entries below `threshold`, grouped by
/// image id with deterministic order: descending score, ties by input index.
///
/// Entries without a finite score are rejected and counted (strict JSON has
/// no NaN literal, so these arrive as null or missing fields).
pub fn load_detections(
    path: &Path,
    threshold: f64,
    skeleton: usize,
) -> Result<(BTreeMap<i64, Vec<DetectionPose>>, DetLoadSummary)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries: Vec<DetEntry> =
        serde_json::from_str(&text).map_err(|e| parse_error(path, &text, &e))?;

    let mut summary = DetLoadSummary {
        total: entries.len(),
        ..Default::default()
    };

    let mut grouped: BTreeMap<i64, Vec<(usize, DetectionPose)>> = BTreeMap::new();
    for (index, entry) in entries.into_iter().enumerate() {
        let score = match entry.score {
            Some(s) if s.is_finite() => s,
            _ => {
                summary.rejected_score += 1;
                summary.warnings.push(format!(
                    "detection at input index {index}: missing or non-finite score, rejected"
                ));
                continue;
            }
        };
        if entry.keypoints.len() != 3 * skeleton {
            return Err(Error::Schema {
                annotation_id: index as i64,
                message: format!(
                    "detection keypoint array has {} values, expected {}",
                    entry.keypoints.len(),
                    3 * skeleton
                ),
            });
        }
        if score < threshold {
            summary.below_threshold += 1;
            continue;
        }
        let keypoints = entry
            .keypoints
            .chunks_exact(3)
            .map(|kp| DetKeypoint {
                x: kp[0],
                y: kp[1],
                // max/min (not clamp) so a NaN confidence lands at 0
                #[allow(clippy::manual_clamp)]
                confidence: kp[2].max(0.0).min(1.0),
            })
            .collect();
        summary.kept += 1;
        grouped.entry(entry.image_id).or_default().push((
            index,
            DetectionPose {
                image_id: entry.image_id,
                keypoints,
                score,
            },
        ));
    }

    let grouped = grouped
        .into_iter()
        .map(|(id, mut dets)| {
            dets.sort_by(|(ia, a), (ib, b)| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(ia.cmp(ib))
            });
            (id, dets.into_iter().map(|(_, d)| d).collect())
        })
        .collect();

    Ok((grouped, summary))
}

/// Attach loaded detections to their scenes. Detections referencing an
/// image id absent from the ground truth are an error.
pub fn attach_detections(
    scenes: &mut [Scene],
    detections: BTreeMap<i64, Vec<DetectionPose>>,
) -> Result<()> {
    let mut by_id: BTreeMap<i64, usize> = BTreeMap::new();
    for (i, scene) in scenes.iter().enumerate() {
        by_id.insert(scene.image_id, i);
    }
    let unknown: Vec<i64> = detections
        .keys()
        .filter(|id| !by_id.contains_key(id))
        .copied()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Reference(unknown));
    }
    for (id, dets) in detections {
        scenes[by_id[&id]].detections = dets;
    }
    Ok(())
}

/// Serialize scenes back to COCO annotation JSON. Loading the output yields
/// scenes equal to the input (masks are written as uncompressed RLE).
pub fn scenes_to_gt_json(scenes: &[Scene]) -> serde_json::Value {
    let images: Vec<ImageEntry> = scenes
        .iter()
        .map(|s| ImageEntry {
            id: s.image_id,
            height: s.height,
            width: s.width,
            file_name: None,
        })
        .collect();

    let mut annotations: Vec<serde_json::Value> = Vec::new();
    for scene in scenes {
        for gt in &scene.gts {
            let mut ann = serde_json::Map::new();
            ann.insert("id".into(), gt.id.into());
            ann.insert("image_id".into(), scene.image_id.into());
            ann.insert("category_id".into(), 1.into());
            ann.insert("area".into(), serde_json::json!(gt.area));
            if let Some(b) = gt.bbox {
                ann.insert("bbox".into(), serde_json::json!([b.x, b.y, b.w, b.h]));
            }
            match &gt.target {
                GtTarget::Pose { keypoints } => {
                    let flat: Vec<f64> = keypoints
                        .iter()
                        .flat_map(|k| [k.x, k.y, k.visibility as f64])
                        .collect();
                    let labeled = keypoints.iter().filter(|k| k.is_labeled()).count();
                    ann.insert("keypoints".into(), serde_json::json!(flat));
                    ann.insert("num_keypoints".into(), labeled.into());
                    ann.insert("iscrowd".into(), 0.into());
                }
                GtTarget::Mask { mask } => {
                    ann.insert("segmentation".into(), mask_to_rle_json(mask));
                    ann.insert("iscrowd".into(), 0.into());
                }
                GtTarget::CrowdMask { mask } => {
                    ann.insert("segmentation".into(), mask_to_rle_json(mask));
                    ann.insert("iscrowd".into(), 1.into());
                }
            }
            annotations.push(serde_json::Value::Object(ann));
        }
    }

    serde_json::json!({
        "images": images.iter().map(|i| serde_json::json!({
            "id": i.id, "height": i.height, "width": i.width
        })).collect::<Vec<_>>(),
        "annotations": annotations,
        "categories": [{"id": 1, "name": "person"}],
    })
}

fn mask_to_rle_json(mask: &BinaryMask) -> serde_json::Value {
    serde_json::json!({
        "size": [mask.height(), mask.width()],
        "counts": mask.encode_rle(),
    })
}

/// Serialize all scene detections to COCO results JSON.
pub fn scenes_to_results_json(scenes: &[Scene]) -> serde_json::Value {
    let mut out = Vec::new();
    for scene in scenes {
        for det in &scene.detections {
            let flat: Vec<f64> = det
                .keypoints
                .iter()
                .flat_map(|k| [k.x, k.y, k.confidence])
                .collect();
            out.push(serde_json::json!({
                "image_id": scene.image_id,
                "category_id": 1,
                "keypoints": flat,
                "score": det.score,
            }));
        }
    }
    serde_json::Value::Array(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::GtKind;

    fn sigmas3() -> SigmaTable {
        SigmaTable::from_constants(vec![0.1, 0.1, 0.1]).unwrap()
    }

    fn write_temp(name: &str, content: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("ocpose-coco-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn classifies_crowd_pose_mask_and_drops() {
        let doc = serde_json::json!({
            "images": [{"id": 1, "height": 4, "width": 4}],
            "annotations": [
                {"id": 10, "image_id": 1, "iscrowd": 1, "area": 16.0,
                 "segmentation": {"size": [4, 4], "counts": [0, 16]}},
                {"id": 11, "image_id": 1, "iscrowd": 0, "area": 4.0,
                 "keypoints": [1.0,1.0,2.0, 2.0,2.0,1.0, 0.0,0.0,0.0]},
                {"id": 12, "image_id": 1, "iscrowd": 0, "area": 4.0,
                 "keypoints": [1.0,1.0,0.0, 2.0,2.0,0.0, 0.0,0.0,0.0],
                 "segmentation": [[0.5,0.5, 2.5,0.5, 2.5,2.5, 0.5,2.5]]},
                {"id": 13, "image_id": 1, "iscrowd": 0, "area": 4.0}
            ]
        });
        let path = write_temp("classify.json", &doc.to_string());
        let (scenes, summary) = load_ground_truth(&path, &sigmas3()).unwrap();
        assert_eq!(scenes.len(), 1);
        let kinds: Vec<GtKind> = scenes[0].gts.iter().map(|g| g.kind()).collect();
        assert_eq!(kinds, vec![GtKind::CrowdMask, GtKind::Pose, GtKind::Mask]);
        assert_eq!(summary.demoted_to_mask, 1);
        assert_eq!(summary.dropped, 1);
        assert_eq!(
            summary.poses + summary.masks + summary.crowd_masks + summary.dropped,
            summary.annotations
        );
    }

    #[test]
    fn scale_from_area_with_bbox_fallback() {
        let doc = serde_json::json!({
            "images": [{"id": 1, "height": 8, "width": 8}],
            "annotations": [
                {"id": 1, "image_id": 1, "area": 10000.0,
                 "keypoints": [1.0,1.0,2.0, 0.0,0.0,0.0, 0.0,0.0,0.0]},
                {"id": 2, "image_id": 1, "bbox": [0.0, 0.0, 3.0, 12.0],
                 "keypoints": [1.0,1.0,2.0, 0.0,0.0,0.0, 0.0,0.0,0.0]}
            ]
        });
        let path = write_temp("scale.json", &doc.to_string());
        let (scenes, _) = load_ground_truth(&path, &sigmas3()).unwrap();
        assert_eq!(scenes[0].gts[0].scale(), 100.0);
        assert_eq!(scenes[0].gts[1].scale(), 6.0);
    }

    #[test]
    fn keypoint_length_mismatch_names_annotation() {
        let doc = serde_json::json!({
            "images": [{"id": 1, "height": 8, "width": 8}],
            "annotations": [
                {"id": 77, "image_id": 1, "area": 4.0, "keypoints": [1.0, 1.0, 2.0, 5.0]}
            ]
        });
        let path = write_temp("badkp.json", &doc.to_string());
        let err = load_ground_truth(&path, &sigmas3()).unwrap_err();
        match err {
            Error::Schema { annotation_id, .. } => assert_eq!(annotation_id, 77),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn missing_image_is_reference_error() {
        let doc = serde_json::json!({
            "images": [{"id": 1, "height": 8, "width": 8}],
            "annotations": [
                {"id": 1, "image_id": 99, "area": 4.0,
                 "keypoints": [1.0,1.0,2.0, 0.0,0.0,0.0, 0.0,0.0,0.0]}
            ]
        });
        let path = write_temp("noimg.json", &doc.to_string());
        match load_ground_truth(&path, &sigmas3()).unwrap_err() {
            Error::Reference(ids) => assert_eq!(ids, vec![99]),
            other => panic!("expected reference error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_reports_offset() {
        let path = write_temp("broken.json", "{\"images\": [}");
        match load_ground_truth(&path, &sigmas3()).unwrap_err() {
            Error::Parse { offset, .. } => assert_eq!(offset, 12),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn detection_threshold_and_order() {
        let mut entries = Vec::new();
        for i in 0..5 {
            entries.push(serde_json::json!({
                "image_id": 1, "category_id": 1, "score": 0.9,
                "keypoints": [i as f64, 0.0, 1.0, 0.0,0.0,1.0, 0.0,0.0,1.0]
            }));
        }
        for _ in 0..5 {
            entries.push(serde_json::json!({
                "image_id": 1, "category_id": 1, "score": 0.1,
                "keypoints": [0.0,0.0,1.0, 0.0,0.0,1.0, 0.0,0.0,1.0]
            }));
        }
        let path = write_temp("dets.json", &serde_json::Value::Array(entries).to_string());
        let (grouped, summary) = load_detections(&path, 0.3, 3).unwrap();
        assert_eq!(summary.kept, 5);
        assert_eq!(summary.below_threshold, 5);
        let dets = &grouped[&1];
        assert_eq!(dets.len(), 5);
        // equal scores keep input order
        let xs: Vec<f64> = dets.iter().map(|d| d.keypoints[0].x).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn zero_threshold_keeps_all_finite() {
        let entries = serde_json::json!([
            {"image_id": 1, "score": 0.0, "keypoints": [0.0,0.0,1.0, 0.0,0.0,1.0, 0.0,0.0,1.0]},
            {"image_id": 1, "score": null, "keypoints": [0.0,0.0,1.0, 0.0,0.0,1.0, 0.0,0.0,1.0]}
        ]);
        let path = write_temp("dets0.json", &entries.to_string());
        let (grouped, summary) = load_detections(&path, 0.0, 3).unwrap();
        assert_eq!(grouped[&1].len(), 1);
        assert_eq!(summary.rejected_score, 1);
    }

    #[test]
    fn confidence_clamped() {
        let entries = serde_json::json!([
            {"image_id": 1, "score": 0.5, "keypoints": [0.0,0.0,7.5, 0.0,0.0,-2.0, 0.0,0.0,0.5]}
        ]);
        let path = write_temp("clamp.json", &entries.to_string());
        let (grouped, _) = load_detections(&path, 0.0, 3).unwrap();
        let confs: Vec<f64> = grouped[&1][0]
            .keypoints
            .iter()
            .map(|k| k.confidence)
            .collect();
        assert_eq!(confs, vec![1.0, 0.0, 0.5]);
    }

    #[test]
    fn attach_rejects_unknown_image() {
        let mut scenes = vec![Scene {
            image_id: 1,
            height: 4,
            width: 4,
            gts: vec![],
            detections: vec![],
        }];
        let mut dets = BTreeMap::new();
        dets.insert(
            2i64,
            vec![DetectionPose {
                image_id: 2,
                keypoints: vec![],
                score: 0.5,
            }],
        );
        match attach_detections(&mut scenes, dets).unwrap_err() {
            Error::Reference(ids) => assert_eq!(ids, vec![2]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gt_round_trip_is_fixed_point() {
        let doc = serde_json::json!({
            "images": [{"id": 3, "height": 6, "width": 6}, {"id": 1, "height": 4, "width": 4}],
            "annotations": [
                {"id": 1, "image_id": 1, "iscrowd": 1, "area": 7.5,
                 "segmentation": {"size": [4, 4], "counts": [3, 5, 8]}},
                {"id": 2, "image_id": 3, "iscrowd": 0, "area": 9.0, "bbox": [1.0, 1.0, 3.0, 3.0],
                 "keypoints": [1.25,1.5,2.0, 2.0,2.0,1.0, 0.0,0.0,0.0]},
                {"id": 3, "image_id": 3, "iscrowd": 0, "area": 4.0,
                 "segmentation": [[0.5,0.5, 2.5,0.5, 2.5,2.5, 0.5,2.5]]}
            ]
        });
        let path = write_temp("roundtrip.json", &doc.to_string());
        let (scenes, _) = load_ground_truth(&path, &sigmas3()).unwrap();
        assert_eq!(scenes[0].image_id, 1); // sorted by image id

        let serialized = scenes_to_gt_json(&scenes).to_string();
        let path2 = write_temp("roundtrip2.json", &serialized);
        let (scenes2, _) = load_ground_truth(&path2, &sigmas3()).unwrap();
        assert_eq!(scenes, scenes2);

        // and once more: serialization is stable
        let serialized2 = scenes_to_gt_json(&scenes2).to_string();
        assert_eq!(serialized, serialized2);
    }

    /// Reference encoder mirroring the official string scheme.
    fn encode_rle_string(counts: &[i64]) -> String {
        let mut s = Vec::new();
        for i in 0..counts.len() {
            let mut x = counts[i];
            if i > 2 {
                x -= counts[i - 2];
            }
            let mut more = true;
            while more {
                let mut c = x & 0x1f;
                x >>= 5;
                more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
                if more {
                    c |= 0x20;
                }
                s.push((c + 48) as u8);
            }
        }
        String::from_utf8(s).unwrap()
    }

    #[test]
    fn compressed_rle_string_decodes() {
        let encoded = encode_rle_string(&[3, 5, 8]);
        assert_eq!(decode_rle_string(&encoded).unwrap(), vec![3, 5, 8]);
        let encoded = encode_rle_string(&[0, 16]);
        assert_eq!(decode_rle_string(&encoded).unwrap(), vec![0, 16]);
        // large counts exercise the multi-char continuation path
        let encoded = encode_rle_string(&[100000, 250000, 33, 7]);
        assert_eq!(
            decode_rle_string(&encoded).unwrap(),
            vec![100000, 250000, 33, 7]
        );
    }

    #[test]
    fn crowd_annotation_with_compressed_string_rle_loads() {
        let counts = encode_rle_string(&[3, 5, 8]);
        let doc = serde_json::json!({
            "images": [{"id": 1, "height": 4, "width": 4}],
            "annotations": [
                {"id": 5, "image_id": 1, "iscrowd": 1, "area": 5.0,
                 "segmentation": {"size": [4, 4], "counts": counts}}
            ]
        });
        let path = write_temp("crowd_string_rle.json", &doc.to_string());
        let (scenes, summary) = load_ground_truth(&path, &sigmas3()).unwrap();
        assert_eq!(summary.crowd_masks, 1);
        let mask = scenes[0].gts[0].mask().unwrap();
        assert_eq!(mask.area(), 5);
        // same pixels as the uncompressed form
        let expected = crate::mask::BinaryMask::decode_rle(&[3, 5, 8], (4, 4)).unwrap();
        assert_eq!(*mask, expected);
    }
}
