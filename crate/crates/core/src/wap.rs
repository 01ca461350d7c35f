//! Weighted-AP frame distance.
//!
//! The distance compares two detection results, treating the first as the
//! reference. Matched pairs contribute their symmetric-difference area and
//! confidence gap; unmatched predictions and unmatched references contribute
//! their area share and confidence. Area shares go through the saturating
//! weight `x / (x + a)` so that small boxes count for less.

use serde::Serialize;

use crate::matching::{match_frames, symmetric_difference_area, MatchResult};
use crate::model::{FrameDetections, MetricConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceBreakdown {
    pub d_tp: f64,
    pub d_fp: f64,
    pub d_fn: f64,
    pub total: f64,
}

/// `x / (x + a)`; 0 at 0, strictly increasing, saturates at 1.
pub fn weight_fn(x: f64, a: f64) -> f64 {
    debug_assert!(x >= 0.0 && a > 0.0);
    x / (x + a)
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn wap_distance(gt: &FrameDetections, pd: &FrameDetections, cfg: &MetricConfig) -> DistanceBreakdown {
    let m = match_frames(gt, pd, cfg);
    wap_from_match(gt, pd, &m, cfg)
}

/// Distance for an already computed matching.
pub fn wap_from_match(
    gt: &FrameDetections,
    pd: &FrameDetections,
    m: &MatchResult,
    cfg: &MetricConfig,
) -> DistanceBreakdown {
    let area_gt = gt.total_area();
    let area_pd = pd.total_area();
    let g = &gt.detections;
    let p = &pd.detections;

    let (da_sum, dc_sum) = m.tp.iter().fold((0.0, 0.0), |(da, dc), &(i, j)| {
        (
            da + symmetric_difference_area(g[i].bbox(), p[j].bbox()),
            dc + (g[i].confidence() - p[j].confidence()).abs(),
        )
    });
    let d_tp = weight_fn(ratio(da_sum, area_pd + area_gt), cfg.a) + cfg.gamma_cs * dc_sum;

    let fp_area: f64 = m.fp.iter().map(|&j| p[j].bbox().area()).sum();
    let fp_conf: f64 = m.fp.iter().map(|&j| p[j].confidence()).sum();
    let d_fp = weight_fn(ratio(fp_area, area_pd), cfg.a) + cfg.gamma_cs * fp_conf;

    let fn_area: f64 = m.fn_.iter().map(|&i| g[i].bbox().area()).sum();
    let fn_conf: f64 = m.fn_.iter().map(|&i| g[i].confidence()).sum();
    let d_fn = weight_fn(ratio(fn_area, area_gt), cfg.a) + cfg.gamma_cs * fn_conf;

    let total = (cfg.alpha_tp * d_tp + cfg.alpha_fp * d_fp + cfg.alpha_fn * d_fn) / cfg.alpha_sum();
    DistanceBreakdown {
        d_tp,
        d_fp,
        d_fn,
        total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, Detection};
    use approx::assert_relative_eq;

    fn det(b: [f64; 4], conf: f64, cls: u32) -> Detection {
        Detection::new(BBox::new(b[0], b[1], b[2], b[3]).unwrap(), conf, cls).unwrap()
    }

    #[test]
    fn weight_fn_values() {
        assert_eq!(weight_fn(0.0, 0.5), 0.0);
        assert_relative_eq!(weight_fn(1.0, 0.5), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(weight_fn(0.5, 0.5), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn empty_frames_are_at_distance_zero() {
        let e = FrameDetections::empty(0);
        let d = wap_distance(&e, &e, &MetricConfig::default());
        assert_eq!(d.total, 0.0);
    }

    #[test]
    fn all_unmatched_predictions_saturate_area_term() {
        // every pd box unmatched -> area ratio 1 regardless of sizes
        let gt = FrameDetections::empty(0);
        let pd = FrameDetections::new(0, vec![det([0.0, 0.0, 1.0, 1.0], 0.0, 0), det([5.0, 5.0, 50.0, 50.0], 0.0, 0)]);
        let d = wap_distance(&gt, &pd, &MetricConfig::default());
        assert_relative_eq!(d.d_fp, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn fn_confidence_sums_only_unmatched_references() {
        let a = det([0.0, 0.0, 10.0, 10.0], 0.9, 1);
        let b = det([50.0, 50.0, 60.0, 60.0], 0.4, 1);
        let gt = FrameDetections::new(0, vec![a, b]);
        let pd = FrameDetections::new(0, vec![a]);
        let cfg = MetricConfig::default();
        let d = wap_distance(&gt, &pd, &cfg);
        assert_relative_eq!(d.d_fn, weight_fn(0.5, cfg.a) + 0.1 * 0.4, epsilon = 1e-12);
        assert_eq!(d.d_tp, 0.0);
        assert_eq!(d.d_fp, 0.0);
    }
}
