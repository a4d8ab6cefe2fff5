//! Optimal-transport matching of detections against GT entries.
//!
//! The per-image matching is a transportation problem. Real detections carry
//! one unit of supply each; non-crowd GTs demand one unit, crowd GTs can
//! absorb every detection, and two dummy nodes price the leftovers: an
//! unmatched detection costs 1 (false positive), an unmatched non-crowd GT
//! costs 1 (false negative), while dummy-to-crowd and dummy-to-dummy
//! absorption is free and excluded from the score. The reported value is the
//! mean cost over the scored pair set.

mod oracle;
mod transport;

pub use oracle::brute_force_oracle;

use crate::dataset::{Scene, SigmaTable};
use crate::similarity::pair_cost;
use transport::MinCostFlow;

/// Pair costs of one scene. Columns are non-crowd GTs first (input order),
/// then crowd GTs.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    n_det: usize,
    n_non_crowd: usize,
    n_crowd: usize,
    costs: Vec<f64>,
    /// Column index -> index into the scene's GT list (for reporting).
    pub non_crowd_src: Vec<usize>,
    pub crowd_src: Vec<usize>,
}

impl CostMatrix {
    pub fn from_scene(scene: &Scene, sigmas: &SigmaTable) -> CostMatrix {
        let mut non_crowd_src = Vec::new();
        let mut crowd_src = Vec::new();
        for (j, gt) in scene.gts.iter().enumerate() {
            if gt.is_crowd() {
                crowd_src.push(j);
            } else {
                non_crowd_src.push(j);
            }
        }
        let n_det = scene.detections.len();
        let n_non_crowd = non_crowd_src.len();
        let n_crowd = crowd_src.len();
        let mut costs = Vec::with_capacity(n_det * (n_non_crowd + n_crowd));
        for det in &scene.detections {
            for &j in &non_crowd_src {
                costs.push(pair_cost(det, &scene.gts[j], sigmas));
            }
            for &j in &crowd_src {
                costs.push(pair_cost(det, &scene.gts[j], sigmas));
            }
        }
        CostMatrix {
            n_det,
            n_non_crowd,
            n_crowd,
            costs,
            non_crowd_src,
            crowd_src,
        }
    }

    /// Build directly from raw entries (row-major, non-crowd columns first).
    pub fn from_raw(n_det: usize, n_non_crowd: usize, n_crowd: usize, costs: Vec<f64>) -> Self {
        assert_eq!(costs.len(), n_det * (n_non_crowd + n_crowd));
        assert!(
            costs
                .iter()
                .all(|c| c.is_finite() && (0.0..=1.0).contains(c)),
            "cost entries must be finite and in [0,1]"
        );
        CostMatrix {
            n_det,
            n_non_crowd,
            n_crowd,
            costs,
            non_crowd_src: (0..n_non_crowd).collect(),
            crowd_src: (n_non_crowd..n_non_crowd + n_crowd).collect(),
        }
    }

    pub fn n_det(&self) -> usize {
        self.n_det
    }

    pub fn n_non_crowd(&self) -> usize {
        self.n_non_crowd
    }

    pub fn n_crowd(&self) -> usize {
        self.n_crowd
    }

    pub fn n_gt(&self) -> usize {
        self.n_non_crowd + self.n_crowd
    }

    /// Cost of detection `det` against column `col` (non-crowd first).
    pub fn cost(&self, det: usize, col: usize) -> f64 {
        self.costs[det * self.n_gt() + col]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetSide {
    Real(usize),
    Dummy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GtSide {
    /// Index into the non-crowd columns.
    NonCrowd(usize),
    /// Index into the crowd columns.
    Crowd(usize),
    Dummy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchPair {
    pub det: DetSide,
    pub gt: GtSide,
    pub cost: f64,
    pub units: i64,
}

impl MatchPair {
    /// Scored pairs: everything except free dummy absorption into crowds or
    /// the dummy GT. Detections matched to crowds can optionally be dropped
    /// from scoring (mAP-style ignore handling).
    fn in_pi_one(&self, exclude_crowd_matches: bool) -> bool {
        match (self.det, self.gt) {
            (DetSide::Real(_), GtSide::Crowd(_)) => !exclude_crowd_matches,
            (DetSide::Real(_), _) => true,
            (DetSide::Dummy, GtSide::NonCrowd(_)) => true,
            (DetSide::Dummy, _) => false,
        }
    }
}

/// An optimized transport plan with its scored subset.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchPlan {
    pub pairs: Vec<MatchPair>,
    /// Full transported cost (the optimization objective).
    pub total_cost: f64,
    /// Cost and size of the scored pair set.
    pub pi_one_cost: f64,
    pub pi_one_count: usize,
    /// pi_one_cost / pi_one_count, 0 when the set is empty.
    pub ocpose: f64,
    /// Detections priced by the dummy GT.
    pub false_positives: usize,
    /// Non-crowd GTs fed by the dummy detection.
    pub false_negatives: usize,
}

impl MatchPlan {
    pub(crate) fn from_pairs(pairs: Vec<MatchPair>, exclude_crowd_matches: bool) -> MatchPlan {
        let mut total_cost = 0.0;
        let mut pi_one_cost = 0.0;
        let mut pi_one_count = 0usize;
        let mut false_positives = 0usize;
        let mut false_negatives = 0usize;
        for pair in &pairs {
            total_cost += pair.cost * pair.units as f64;
            if pair.in_pi_one(exclude_crowd_matches) {
                pi_one_cost += pair.cost * pair.units as f64;
                pi_one_count += pair.units as usize;
            }
            match (pair.det, pair.gt) {
                (DetSide::Real(_), GtSide::Dummy) => false_positives += pair.units as usize,
                (DetSide::Dummy, GtSide::NonCrowd(_)) => false_negatives += pair.units as usize,
                _ => {}
            }
        }
        let ocpose = if pi_one_count == 0 {
            0.0
        } else {
            pi_one_cost / pi_one_count as f64
        };
        MatchPlan {
            pairs,
            total_cost,
            pi_one_cost,
            pi_one_count,
            ocpose,
            false_positives,
            false_negatives,
        }
    }

    /// Real detection <-> real GT matches, for reporting.
    pub fn matched_pairs(&self) -> impl Iterator<Item = &MatchPair> {
        self.pairs.iter().filter(|p| {
            matches!(
                (p.det, p.gt),
                (DetSide::Real(_), GtSide::NonCrowd(_)) | (DetSide::Real(_), GtSide::Crowd(_))
            )
        })
    }
}

/// Solve the transportation problem exactly and assemble the plan.
///
/// Supplies: one per detection plus `n_non_crowd + n_det * n_crowd` on the
/// dummy detection. Demands: one per non-crowd GT, `n_det` per crowd GT,
/// `n_det` on the dummy GT. Arcs: detection->GT at the pair cost,
/// detection->dummy GT and dummy->non-crowd GT at 1, dummy absorption at 0.
#[allow(clippy::needless_range_loop)] // indices mirror the node/edge-id layout
pub fn solve_transport(costs: &CostMatrix, exclude_crowd_matches: bool) -> MatchPlan {
    let nd = costs.n_det;
    let nnc = costs.n_non_crowd;
    let nc = costs.n_crowd;

    let supply = (nd + nnc + nd * nc) as i64;
    if supply == 0 {
        return MatchPlan::from_pairs(Vec::new(), exclude_crowd_matches);
    }

    let source = 0;
    let sink = 1;
    let det_node = |i: usize| 2 + i;
    let dummy_det = 2 + nd;
    let gt_node = |j: usize| 3 + nd + j;
    let crowd_node = |c: usize| 3 + nd + nnc + c;
    let dummy_gt = 3 + nd + nnc + nc;
    let mut flow = MinCostFlow::new(4 + nd + nnc + nc);

    // edge ids we need to read back
    let mut det_gt = vec![vec![0usize; nnc]; nd];
    let mut det_crowd = vec![vec![0usize; nc]; nd];
    let mut det_dummy = vec![0usize; nd];
    let mut dummy_gt_edges = vec![0usize; nnc];
    let mut dummy_crowd = vec![0usize; nc];

    for i in 0..nd {
        flow.add_edge(source, det_node(i), 1, 0.0);
    }
    flow.add_edge(source, dummy_det, (nnc + nd * nc) as i64, 0.0);
    for i in 0..nd {
        for j in 0..nnc {
            det_gt[i][j] = flow.add_edge(det_node(i), gt_node(j), 1, costs.cost(i, j));
        }
        for c in 0..nc {
            det_crowd[i][c] = flow.add_edge(det_node(i), crowd_node(c), 1, costs.cost(i, nnc + c));
        }
        det_dummy[i] = flow.add_edge(det_node(i), dummy_gt, 1, 1.0);
    }
    for j in 0..nnc {
        dummy_gt_edges[j] = flow.add_edge(dummy_det, gt_node(j), 1, 1.0);
    }
    for c in 0..nc {
        dummy_crowd[c] = flow.add_edge(dummy_det, crowd_node(c), nd as i64, 0.0);
    }
    let dummy_dummy = flow.add_edge(dummy_det, dummy_gt, nd as i64, 0.0);
    for j in 0..nnc {
        flow.add_edge(gt_node(j), sink, 1, 0.0);
    }
    for c in 0..nc {
        flow.add_edge(crowd_node(c), sink, nd as i64, 0.0);
    }
    flow.add_edge(dummy_gt, sink, nd as i64, 0.0);

    let sent = flow.solve(source, sink);
    assert_eq!(
        sent, supply,
        "transportation problem must be feasible by construction"
    );

    // Canonical pair order: detections ascending, then dummy rows.
    let mut pairs = Vec::new();
    for i in 0..nd {
        for j in 0..nnc {
            if flow.flow_on(det_gt[i][j]) > 0 {
                pairs.push(MatchPair {
                    det: DetSide::Real(i),
                    gt: GtSide::NonCrowd(j),
                    cost: costs.cost(i, j),
                    units: 1,
                });
            }
        }
        for c in 0..nc {
            if flow.flow_on(det_crowd[i][c]) > 0 {
                pairs.push(MatchPair {
                    det: DetSide::Real(i),
                    gt: GtSide::Crowd(c),
                    cost: costs.cost(i, nnc + c),
                    units: 1,
                });
            }
        }
        if flow.flow_on(det_dummy[i]) > 0 {
            pairs.push(MatchPair {
                det: DetSide::Real(i),
                gt: GtSide::Dummy,
                cost: 1.0,
                units: 1,
            });
        }
    }
    for j in 0..nnc {
        if flow.flow_on(dummy_gt_edges[j]) > 0 {
            pairs.push(MatchPair {
                det: DetSide::Dummy,
                gt: GtSide::NonCrowd(j),
                cost: 1.0,
                units: 1,
            });
        }
    }
    for c in 0..nc {
        let units = flow.flow_on(dummy_crowd[c]);
        if units > 0 {
            pairs.push(MatchPair {
                det: DetSide::Dummy,
                gt: GtSide::Crowd(c),
                cost: 0.0,
                units,
            });
        }
    }
    let units = flow.flow_on(dummy_dummy);
    if units > 0 {
        pairs.push(MatchPair {
            det: DetSide::Dummy,
            gt: GtSide::Dummy,
            cost: 0.0,
            units,
        });
    }

    MatchPlan::from_pairs(pairs, exclude_crowd_matches)
}

/// Dataset-level aggregation of per-image plans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcposeAggregate {
    /// Mean of per-image values over images with a non-empty scored set.
    pub per_image_mean: f64,
    /// Total scored cost over total scored pairs, dataset-wide.
    pub pooled: f64,
    pub pi_one_total: usize,
    pub cost_total: f64,
}

pub fn aggregate_plans<'a>(plans: impl IntoIterator<Item = &'a MatchPlan>) -> OcposeAggregate {
    let mut cost_total = 0.0;
    let mut pi_one_total = 0usize;
    let mut mean_sum = 0.0;
    let mut mean_n = 0usize;
    for plan in plans {
        cost_total += plan.pi_one_cost;
        pi_one_total += plan.pi_one_count;
        if plan.pi_one_count > 0 {
            mean_sum += plan.ocpose;
            mean_n += 1;
        }
    }
    OcposeAggregate {
        per_image_mean: if mean_n == 0 {
            0.0
        } else {
            mean_sum / mean_n as f64
        },
        pooled: if pi_one_total == 0 {
            0.0
        } else {
            cost_total / pi_one_total as f64
        },
        pi_one_total,
        cost_total,
    }
}
