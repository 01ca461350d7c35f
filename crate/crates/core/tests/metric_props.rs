mod common;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use wapdet::map::{average_precision, frame_pair_map, map_distance};
use wapdet::{match_frames, wap_distance, BBox, Detection, FrameDetections, MetricConfig};

fn pair(seed: u64, max_len: usize) -> (FrameDetections, FrameDetections) {
    let mut rng = common::rng(seed);
    let gt = common::random_frame(&mut rng, max_len, 3);
    let pd = common::detector_like(&mut rng, &gt, max_len, 3);
    (gt, pd)
}

fn with(frame: &FrameDetections, extra: Detection) -> FrameDetections {
    let mut f = frame.clone();
    f.detections.push(extra);
    f
}

fn det(x: f64, y: f64, side: f64, conf: f64, class: u32) -> Detection {
    Detection::new(BBox::new(x, y, x + side, y + side).unwrap(), conf, class).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn match_result_partitions_indices(seed in any::<u64>()) {
        let (gt, pd) = pair(seed, 7);
        let cfg = MetricConfig::default();
        let m = match_frames(&gt, &pd, &cfg);
        let mut g: Vec<usize> = m.tp.iter().map(|p| p.0).chain(m.fn_.iter().copied()).collect();
        let mut p: Vec<usize> = m.tp.iter().map(|p| p.1).chain(m.fp.iter().copied()).collect();
        g.sort();
        p.sort();
        prop_assert_eq!(g, (0..gt.len()).collect::<Vec<_>>());
        prop_assert_eq!(p, (0..pd.len()).collect::<Vec<_>>());
        for &(i, j) in &m.tp {
            let (a, b) = (&gt.detections[i], &pd.detections[j]);
            prop_assert_eq!(a.class_id(), b.class_id());
            prop_assert!(wapdet::iou(a.bbox(), b.bbox()) > cfg.min_overlap);
        }
    }

    #[test]
    fn wap_is_bounded(seed in any::<u64>()) {
        let (gt, pd) = pair(seed, 7);
        let cfg = MetricConfig::default();
        let d = wap_distance(&gt, &pd, &cfg);
        let n = gt.len().max(pd.len()) as f64;
        for v in [d.d_tp, d.d_fp, d.d_fn, d.total] {
            prop_assert!(v >= 0.0 && v <= 1.0 + cfg.gamma_cs * n);
        }
    }

    #[test]
    fn extra_false_positive_never_lowers_fp_term(seed in any::<u64>(), side in 1.0f64..80.0, conf in 0.0f64..=1.0) {
        let (gt, pd) = pair(seed, 6);
        let cfg = MetricConfig::default();
        // class 99 never occurs in the reference, so the box stays unmatched
        let more = with(&pd, det(300.0, 300.0, side, conf, 99));
        let before = wap_distance(&gt, &pd, &cfg);
        let after = wap_distance(&gt, &more, &cfg);
        prop_assert!(after.d_fp >= before.d_fp);
        prop_assert_eq!(after.d_fn, before.d_fn);
    }

    #[test]
    fn missed_small_box_counts_less_than_missed_large_box(seed in any::<u64>(), small in 1.0f64..30.0, grow in 1.0f64..60.0) {
        let (gt, pd) = pair(seed, 5);
        let cfg = MetricConfig::default();
        let d_small = wap_distance(&with(&gt, det(300.0, 300.0, small, 0.5, 99)), &pd, &cfg);
        let d_large = wap_distance(&with(&gt, det(300.0, 300.0, small + grow, 0.5, 99)), &pd, &cfg);
        prop_assert!(d_small.d_fn <= d_large.d_fn);
        // with any matched reference area the missed share is below 1 and grows with the box
        if !match_frames(&gt, &pd, &cfg).tp.is_empty() {
            prop_assert!(d_small.d_fn < d_large.d_fn);
        }
    }

    #[test]
    fn map_invariant_under_prediction_order(seed in any::<u64>(), rot in 0usize..8) {
        let (gt, pd) = pair(seed, 6);
        let mut shuffled = pd.clone();
        let n = shuffled.detections.len();
        if n > 0 {
            shuffled.detections.rotate_left(rot % n);
            shuffled.detections.reverse();
        }
        prop_assert_eq!(map_distance(&gt, &pd, 0.5), map_distance(&gt, &shuffled, 0.5));
    }

    #[test]
    fn map_agrees_with_brute_force(seed in any::<u64>()) {
        let (gt, pd) = pair(seed, 6);
        let distinct_conf = {
            let mut c: Vec<f64> = pd.detections.iter().map(|d| d.confidence()).collect();
            c.sort_by(f64::total_cmp);
            c.windows(2).all(|w| w[0] != w[1])
        };
        prop_assume!(distinct_conf);
        let got = frame_pair_map(&gt, &pd, 0.5);
        let want = common::brute_force_map(&gt, &pd, 0.5);
        prop_assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }

    #[test]
    fn ap_agrees_with_brute_force(hits in prop::collection::vec(any::<bool>(), 0..12), extra in 0usize..4) {
        let n_gt = hits.iter().filter(|&&h| h).count() + extra;
        let got = average_precision(&hits, n_gt);
        let want = common::brute_force_ap(&hits, n_gt);
        prop_assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }
}

#[test]
fn identical_frames_have_zero_distance_under_both_metrics() {
    let cfg = MetricConfig::default();
    for seed in 0..200 {
        let mut rng = common::rng(seed);
        let f = common::random_frame(&mut rng, 8, 3);
        assert_eq!(wap_distance(&f, &f, &cfg).total, 0.0);
        assert_eq!(map_distance(&f, &f, 0.5), 0.0);
    }
}

#[test]
fn symmetric_under_equal_fp_fn_weights() -> Result<(), TestCaseError> {
    let cfg = MetricConfig::default();
    for seed in 0..300 {
        let (gt, pd) = pair(seed, 6);
        let a = wap_distance(&gt, &pd, &cfg);
        let b = wap_distance(&pd, &gt, &cfg);
        prop_assert!((a.total - b.total).abs() < 1e-12);
        prop_assert!((a.d_fp - b.d_fn).abs() < 1e-12);
    }
    Ok(())
}
