//! Precision/recall/F evaluation by greedy one-to-one IoU matching.

use serde::Serialize;

use crate::geometry::quad_iou;
use crate::postprocess::Detection;
use crate::targets::GroundTruth;
use crate::Real;

/// One detection-to-ground-truth assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchPair {
    pub detection: usize,
    pub ground_truth: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub true_positives: usize,
    /// Detections counted in the precision denominator (those matching only
    /// a DO-NOT-CARE region are excluded).
    pub counted_detections: usize,
    pub care_ground_truth: usize,
    pub matches: Vec<MatchPair>,
}

impl Metrics {
    fn from_counts(
        true_positives: usize,
        counted_detections: usize,
        care_ground_truth: usize,
        matches: Vec<MatchPair>,
    ) -> Self {
        let precision = if counted_detections == 0 {
            0.0
        } else {
            true_positives as f64 / counted_detections as f64
        };
        let recall = if care_ground_truth == 0 {
            0.0
        } else {
            true_positives as f64 / care_ground_truth as f64
        };
        let f_measure = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f_measure,
            true_positives,
            counted_detections,
            care_ground_truth,
            matches,
        }
    }
}

/// Greedy one-to-one matching: detections in descending score order (ties
/// by input index) each claim the unclaimed care region of highest quad IoU
/// at or above `iou_thresh`. A detection whose only match at threshold is a
/// DO-NOT-CARE region neither rewards nor penalizes.
pub fn evaluate<T: Real>(dets: &[Detection<T>], gt: &GroundTruth<T>, iou_thresh: T) -> Metrics {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .expect("finite scores")
            .then(a.cmp(&b))
    });

    let mut claimed = vec![false; gt.regions.len()];
    let mut matches = Vec::new();
    let mut excluded = 0usize;

    for &di in &order {
        let mut best: Option<(usize, T)> = None;
        for (g, region) in gt.regions.iter().enumerate() {
            if !region.care || claimed[g] {
                continue;
            }
            let iou = quad_iou(&dets[di].quad, &region.quad);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, iou)) = best {
            if iou >= iou_thresh {
                claimed[g] = true;
                matches.push(MatchPair {
                    detection: di,
                    ground_truth: g,
                    iou: iou.to_f64().expect("finite"),
                });
                continue;
            }
        }
        // Unmatched: drop it from the precision denominator when it only
        // overlaps a DO-NOT-CARE region.
        let hits_no_care = gt
            .regions
            .iter()
            .any(|r| !r.care && quad_iou(&dets[di].quad, &r.quad) >= iou_thresh);
        if hits_no_care {
            excluded += 1;
        }
    }

    Metrics::from_counts(
        matches.len(),
        dets.len() - excluded,
        gt.care_count(),
        matches,
    )
}

/// Micro-averages per-image metrics by summing their counts.
pub fn aggregate_metrics(per_image: &[Metrics]) -> Metrics {
    Metrics::from_counts(
        per_image.iter().map(|m| m.true_positives).sum(),
        per_image.iter().map(|m| m.counted_detections).sum(),
        per_image.iter().map(|m| m.care_ground_truth).sum(),
        Vec::new(),
    )
}
