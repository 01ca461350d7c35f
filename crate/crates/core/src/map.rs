//! Mean average precision between two single frames, used as the baseline
//! distance `1 - mAP`.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::matching::iou;
use crate::model::{Detection, FrameDetections};

/// Intrinsic ordering of detections so results do not depend on list order.
fn cmp_box(a: &Detection, b: &Detection) -> Ordering {
    let (a, b) = (a.bbox().to_array(), b.bbox().to_array());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Marks each prediction (already ranked) as TP or FP against `gts`.
fn mark_ranked(gts: &[&Detection], ranked: &[&Detection], min_overlap: f64) -> Vec<bool> {
    let mut claimed = vec![false; gts.len()];
    ranked
        .iter()
        .map(|p| {
            let best = gts
                .iter()
                .enumerate()
                .filter(|(k, _)| !claimed[*k])
                .map(|(k, g)| (k, iou(g.bbox(), p.bbox()), *g))
                .filter(|(_, v, _)| *v > min_overlap)
                .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| cmp_box(b.2, a.2)));
            match best {
                Some((k, _, _)) => {
                    claimed[k] = true;
                    true
                }
                None => false,
            }
        })
        .collect()
}

/// All-point interpolated AP of a ranked TP/FP list against `n_gt` references.
pub fn average_precision(hits: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(hits.len());
    for (k, &hit) in hits.iter().enumerate() {
        if hit {
            tp += 1;
        }
        points.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
    }
    // precision envelope, right to left
    let mut ap = 0.0;
    let mut best = 0.0f64;
    let mut prev_recall_right = None;
    for &(recall, precision) in points.iter().rev() {
        if let Some(r_right) = prev_recall_right {
            ap += (r_right - recall) * best;
        }
        best = best.max(precision);
        prev_recall_right = Some(recall);
    }
    if let Some(r_first) = prev_recall_right {
        ap += r_first * best;
    }
    ap
}

pub fn frame_pair_map(gt: &FrameDetections, pd: &FrameDetections, min_overlap: f64) -> f64 {
    if gt.is_empty() && pd.is_empty() {
        return 1.0;
    }
    let gt_classes: BTreeSet<u32> = gt.detections.iter().map(|d| d.class_id()).collect();
    let pd_only = pd
        .detections
        .iter()
        .map(|d| d.class_id())
        .filter(|c| !gt_classes.contains(c))
        .collect::<BTreeSet<_>>()
        .len();

    let ap_sum: f64 = gt_classes
        .iter()
        .map(|&c| {
            let gts: Vec<&Detection> = gt.detections.iter().filter(|d| d.class_id() == c).collect();
            let mut ranked: Vec<&Detection> = pd.detections.iter().filter(|d| d.class_id() == c).collect();
            ranked.sort_by(|a, b| b.confidence().total_cmp(&a.confidence()).then_with(|| cmp_box(a, b)));
            average_precision(&mark_ranked(&gts, &ranked, min_overlap), gts.len())
        })
        .sum();
    ap_sum / (gt_classes.len() + pd_only) as f64
}

pub fn map_distance(gt: &FrameDetections, pd: &FrameDetections, min_overlap: f64) -> f64 {
    1.0 - frame_pair_map(gt, pd, min_overlap)
}
