//! Exhaustive verification oracle for the transport solve.
//!
//! Every integral plan of the transportation formulation is determined by
//! the per-detection choices alone: each detection sends its unit to one
//! non-crowd GT (injectively), to some crowd, or to the dummy GT, and the
//! dummy-detection flows are then forced by the demands. Enumerating those
//! choices therefore enumerates all feasible integral plans.

use crate::error::{Error, Result};

use super::{CostMatrix, DetSide, GtSide, MatchPair, MatchPlan};

const SIZE_LIMIT: usize = 6;

/// Enumerate all feasible plans and return a minimum-cost one; ties resolve
/// to the lexicographically smallest choice vector. Refuses instances with
/// more than 6 detections or 6 GT entries.
pub fn brute_force_oracle(costs: &CostMatrix, exclude_crowd_matches: bool) -> Result<MatchPlan> {
    let nd = costs.n_det();
    let nnc = costs.n_non_crowd();
    let nc = costs.n_crowd();
    if nd > SIZE_LIMIT || nnc + nc > SIZE_LIMIT {
        return Err(Error::OracleLimit {
            n_det: nd,
            n_gt: nnc + nc,
        });
    }

    // choice per detection: [0, nnc) a non-crowd GT, [nnc, nnc+nc) a crowd,
    // nnc+nc the dummy GT
    let mut used = vec![false; nnc];
    let mut choices = vec![usize::MAX; nd];
    let mut best: Option<(f64, Vec<usize>)> = None;

    fn recurse(
        costs: &CostMatrix,
        det: usize,
        acc: f64,
        used: &mut Vec<bool>,
        choices: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        let nd = costs.n_det();
        let nnc = costs.n_non_crowd();
        let nc = costs.n_crowd();
        if det == nd {
            let unmatched = used.iter().filter(|&&u| !u).count();
            let total = acc + unmatched as f64;
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                *best = Some((total, choices.clone()));
            }
            return;
        }
        for choice in 0..=nnc + nc {
            let cost = if choice < nnc {
                if used[choice] {
                    continue;
                }
                costs.cost(det, choice)
            } else if choice < nnc + nc {
                costs.cost(det, choice)
            } else {
                1.0
            };
            if choice < nnc {
                used[choice] = true;
            }
            choices[det] = choice;
            recurse(costs, det + 1, acc + cost, used, choices, best);
            if choice < nnc {
                used[choice] = false;
            }
        }
        choices[det] = usize::MAX;
    }

    recurse(costs, 0, 0.0, &mut used, &mut choices, &mut best);
    let (_, choices) = best.expect("at least the all-dummy plan is feasible");

    // Reassemble in the solver's canonical pair order.
    let mut pairs = Vec::new();
    let mut gt_matched = vec![false; nnc];
    let mut crowd_units = vec![0i64; nc];
    let mut dummy_gt_units = 0i64;
    for (det, &choice) in choices.iter().enumerate() {
        if choice < nnc {
            gt_matched[choice] = true;
            pairs.push(MatchPair {
                det: DetSide::Real(det),
                gt: GtSide::NonCrowd(choice),
                cost: costs.cost(det, choice),
                units: 1,
            });
        } else if choice < nnc + nc {
            crowd_units[choice - nnc] += 1;
            pairs.push(MatchPair {
                det: DetSide::Real(det),
                gt: GtSide::Crowd(choice - nnc),
                cost: costs.cost(det, choice),
                units: 1,
            });
        } else {
            dummy_gt_units += 1;
            pairs.push(MatchPair {
                det: DetSide::Real(det),
                gt: GtSide::Dummy,
                cost: 1.0,
                units: 1,
            });
        }
    }
    for (j, matched) in gt_matched.iter().enumerate() {
        if !matched {
            pairs.push(MatchPair {
                det: DetSide::Dummy,
                gt: GtSide::NonCrowd(j),
                cost: 1.0,
                units: 1,
            });
        }
    }
    for (c, &taken) in crowd_units.iter().enumerate() {
        let units = nd as i64 - taken;
        if units > 0 {
            pairs.push(MatchPair {
                det: DetSide::Dummy,
                gt: GtSide::Crowd(c),
                cost: 0.0,
                units,
            });
        }
    }
    let dd_units = nd as i64 - dummy_gt_units;
    if dd_units > 0 {
        pairs.push(MatchPair {
            det: DetSide::Dummy,
            gt: GtSide::Dummy,
            cost: 0.0,
            units: dd_units,
        });
    }

    Ok(MatchPlan::from_pairs(pairs, exclude_crowd_matches))
}
