//! Report structures with a stable, versioned JSON schema.
//!
//! Field order is fixed by struct declaration and floats serialize via the
//! shortest round-trip form, so identical runs produce byte-identical
//! documents. No timestamps are embedded.

use serde::Serialize;

use crate::ranking::PrCurve;

pub const SCHEMA_VERSION: u32 = 1;
pub const SOLVER_ID: &str = "transport-ssp/v1";

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
    pub solver: &'static str,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo {
            name: "ocpose",
            version: env!("CARGO_PKG_VERSION"),
            solver: SOLVER_ID,
        }
    }
}

/// Everything needed to reproduce a run bit-exactly.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub gt_path: String,
    pub dt_path: String,
    pub threshold: f64,
    pub sigma_table_hash: String,
    pub skeleton: usize,
    pub bbox_expand: f64,
    pub exclude_crowd_matches: bool,
    pub aggregation: String,
    pub jobs: usize,
    pub oks_thresholds: Vec<f64>,
    pub ap_interpolation: String,
    pub ignore_mode: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchedPairOut {
    /// Detection index within the image (score-ranked order).
    pub det: usize,
    /// GT annotation id.
    pub gt: i64,
    pub gt_kind: &'static str,
    pub cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageReport {
    pub image_id: i64,
    pub ocpose: f64,
    pub pi_one: usize,
    pub pi_one_cost: f64,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_count: usize,
    pub matched_pairs: Vec<MatchedPairOut>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ApPoint {
    pub oks_threshold: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateReport {
    pub ocpose_per_image_mean: f64,
    pub ocpose_pooled: f64,
    pub map: f64,
    pub ap_per_threshold: Vec<ApPoint>,
    pub total_fp: usize,
    pub total_fn: usize,
    pub images: usize,
    pub detections: usize,
    pub gt_poses: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub config: ConfigEcho,
    pub per_image: Vec<ImageReport>,
    pub aggregate: AggregateReport,
}

impl EvaluationReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The headline value under the configured aggregation.
    pub fn headline_ocpose(&self) -> f64 {
        if self.config.aggregation == "per-image" {
            self.aggregate.ocpose_per_image_mean
        } else {
            self.aggregate.ocpose_pooled
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub ocpose: f64,
    pub map: f64,
    pub kept_detections: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub grid: Vec<SweepPoint>,
    pub argmin_threshold: f64,
    pub argmin_ocpose: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub name: String,
    pub map: f64,
    pub ocpose_pooled: f64,
    pub ocpose_per_image_mean: f64,
    pub detections: usize,
    pub total_fp: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareResult {
    pub rows: Vec<CompareRow>,
    /// Method pairs the two metrics order differently.
    pub disagreements: Vec<[String; 2]>,
    pub rank_disagreement: bool,
}

/// PR curves of one confidence threshold, one curve per OKS threshold.
#[derive(Debug, Clone, Serialize)]
pub struct PrCurveSet {
    pub confidence_threshold: f64,
    pub kept_detections: usize,
    pub map: f64,
    pub curves: Vec<PrCurve>,
}
