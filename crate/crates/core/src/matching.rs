//! Partitioning of a (reference, prediction) frame pair into true positives,
//! false positives and false negatives.

use std::cmp::Ordering;

use crate::model::{BBox, FrameDetections, MetricConfig};

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Area of `(a - b) ∪ (b - a)`.
pub fn symmetric_difference_area(a: &BBox, b: &BBox) -> f64 {
    (a.area() + b.area() - 2.0 * a.intersection_area(b)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchResult {
    /// `(gt_index, pd_index)` pairs, in the order they were accepted.
    pub tp: Vec<(usize, usize)>,
    /// Unmatched prediction indices, ascending.
    pub fp: Vec<usize>,
    /// Unmatched reference indices, ascending.
    pub fn_: Vec<usize>,
}

/// One-to-one greedy matching.
///
/// A pair is eligible when `IoU > min_overlap` and the class ids agree.
/// Eligible pairs are accepted by descending IoU; ties go to the lower gt
/// index, then the lower pd index.
pub fn match_frames(gt: &FrameDetections, pd: &FrameDetections, cfg: &MetricConfig) -> MatchResult {
    let mut candidates = Vec::new();
    for (i, g) in gt.detections.iter().enumerate() {
        for (j, p) in pd.detections.iter().enumerate() {
            if g.class_id() != p.class_id() {
                continue;
            }
            let v = iou(g.bbox(), p.bbox());
            if v > cfg.min_overlap {
                candidates.push((v, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut gt_used = vec![false; gt.len()];
    let mut pd_used = vec![false; pd.len()];
    let mut tp = Vec::new();
    for (_, i, j) in candidates {
        if !gt_used[i] && !pd_used[j] {
            gt_used[i] = true;
            pd_used[j] = true;
            tp.push((i, j));
        }
    }
    let unused = |used: &[bool]| {
        used.iter()
            .enumerate()
            .filter(|(_, u)| !**u)
            .map(|(k, _)| k)
            .collect::<Vec<_>>()
    };
    MatchResult {
        fp: unused(&pd_used),
        fn_: unused(&gt_used),
        tp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Detection;
    use approx::assert_relative_eq;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn frame(dets: &[(BBox, u32)]) -> FrameDetections {
        FrameDetections::new(
            0,
            dets.iter()
                .map(|&(b, c)| Detection::new(b, 0.9, c).unwrap())
                .collect(),
        )
    }

    #[test]
    fn iou_fixtures() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(20.0, 20.0, 30.0, 30.0)), 0.0);
        assert_relative_eq!(iou(&a, &bb(5.0, 0.0, 15.0, 10.0)), 1.0 / 3.0, epsilon = 1e-12);
        // touching edges share no area
        assert_eq!(iou(&a, &bb(10.0, 0.0, 20.0, 10.0)), 0.0);
    }

    #[test]
    fn symmetric_difference_fixtures() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        assert_eq!(symmetric_difference_area(&a, &a), 0.0);
        assert_eq!(symmetric_difference_area(&a, &bb(20.0, 20.0, 30.0, 30.0)), 200.0);
        assert_eq!(symmetric_difference_area(&a, &bb(5.0, 0.0, 15.0, 10.0)), 100.0);
    }

    #[test]
    fn identical_single_box_matches() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let m = match_frames(&frame(&[(a, 1)]), &frame(&[(a, 1)]), &MetricConfig::default());
        assert_eq!(m.tp, vec![(0, 0)]);
        assert!(m.fp.is_empty() && m.fn_.is_empty());
    }

    #[test]
    fn class_mismatch_never_matches() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let m = match_frames(&frame(&[(a, 1)]), &frame(&[(a, 2)]), &MetricConfig::default());
        assert!(m.tp.is_empty());
        assert_eq!(m.fp, vec![0]);
        assert_eq!(m.fn_, vec![0]);
    }

    #[test]
    fn best_of_two_candidates_wins() {
        // A = [0,10]^2; shift along x so that IoU = 10(10-s)/(10(10+s)).
        // IoU 0.6 -> s = 2.5; IoU 0.55 -> s = 45/15.5.
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let s1 = 2.5;
        let s2 = 4.5 / 1.55;
        let p1 = bb(s1, 0.0, 10.0 + s1, 10.0);
        let p2 = bb(s2, 0.0, 10.0 + s2, 10.0);
        assert_relative_eq!(iou(&a, &p1), 0.6, epsilon = 1e-12);
        assert_relative_eq!(iou(&a, &p2), 0.55, epsilon = 1e-12);
        let m = match_frames(&frame(&[(a, 1)]), &frame(&[(p1, 1), (p2, 1)]), &MetricConfig::default());
        assert_eq!(m.tp, vec![(0, 0)]);
        assert_eq!(m.fp, vec![1]);
        assert!(m.fn_.is_empty());
    }

    #[test]
    fn threshold_is_strict() {
        // IoU exactly 1/3
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(5.0, 0.0, 15.0, 10.0);
        let cfg = MetricConfig {
            min_overlap: iou(&a, &b),
            ..Default::default()
        };
        let m = match_frames(&frame(&[(a, 0)]), &frame(&[(b, 0)]), &cfg);
        assert!(m.tp.is_empty());
    }

    #[test]
    fn equal_ious_break_ties_by_index() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let m = match_frames(
            &frame(&[(a, 0), (a, 0)]),
            &frame(&[(a, 0), (a, 0)]),
            &MetricConfig::default(),
        );
        assert_eq!(m.tp, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn greedy_is_not_total_iou_optimal_in_general() {
        // One gt overlapping two predictions and a second gt overlapping only
        // the better one: greedy takes the single best pair, while the
        // total-IoU maximum takes the two weaker pairs.
        let g0 = bb(0.0, 0.0, 10.0, 10.0);
        let g1 = bb(2.0, 0.0, 14.0, 10.0);
        let p0 = bb(1.0, 0.0, 11.0, 10.0);
        let p1 = bb(-3.0, 0.0, 9.0, 10.0);
        assert!(iou(&g1, &p1) < 0.5);
        let m = match_frames(&frame(&[(g0, 0), (g1, 0)]), &frame(&[(p0, 0), (p1, 0)]), &MetricConfig::default());
        assert_eq!(m.tp, vec![(0, 0)]);
        assert!(iou(&g0, &p0) < iou(&g0, &p1) + iou(&g1, &p0));
    }
}
