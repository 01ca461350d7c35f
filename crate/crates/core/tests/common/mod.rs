//! Independent oracles and random instance generators shared by the
//! integration tests. Nothing here calls into the code paths it checks,
//! except for box geometry (`iou`), which has its own fixtures.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wapdet::{iou, BBox, Detection, FrameDetections, ImageBuffer};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_box(rng: &mut ChaCha8Rng, extent: f64, min: f64, max: f64) -> BBox {
    let w = rng.random_range(min..max);
    let h = rng.random_range(min..max);
    let x = rng.random_range(0.0..extent - w);
    let y = rng.random_range(0.0..extent - h);
    BBox::new(x, y, x + w, y + h).unwrap()
}

/// Frame of `0..=max_len` random boxes over a 200x200 image.
pub fn random_frame(rng: &mut ChaCha8Rng, max_len: usize, classes: u32) -> FrameDetections {
    let n = rng.random_range(0..=max_len);
    FrameDetections::new(
        0,
        (0..n)
            .map(|_| {
                Detection::new(
                    random_box(rng, 200.0, 5.0, 80.0),
                    rng.random_range(0.0..=1.0),
                    rng.random_range(0..classes),
                )
                .unwrap()
            })
            .collect(),
    )
}

/// Prediction frame that looks like detector output for `gt`: mostly jittered
/// copies of reference boxes, the rest unrelated boxes.
pub fn detector_like(rng: &mut ChaCha8Rng, gt: &FrameDetections, max_len: usize, classes: u32) -> FrameDetections {
    let n = rng.random_range(0..=max_len);
    let dets = (0..n)
        .map(|_| {
            if !gt.is_empty() && rng.random_bool(0.7) {
                let g = gt.detections[rng.random_range(0..gt.len())];
                let b = g.bbox();
                let nx = Normal::new(0.0, 0.1 * b.width()).unwrap();
                let ny = Normal::new(0.0, 0.1 * b.height()).unwrap();
                let mut corners = [
                    b.x1() + nx.sample(rng),
                    b.y1() + ny.sample(rng),
                    b.x2() + nx.sample(rng),
                    b.y2() + ny.sample(rng),
                ];
                if corners[2] <= corners[0] {
                    corners[2] = corners[0] + 1.0;
                }
                if corners[3] <= corners[1] {
                    corners[3] = corners[1] + 1.0;
                }
                let class = if rng.random_bool(0.9) {
                    g.class_id()
                } else {
                    rng.random_range(0..classes)
                };
                Detection::new(
                    BBox::try_from(corners).unwrap(),
                    rng.random_range(0.0..=1.0),
                    class,
                )
                .unwrap()
            } else {
                Detection::new(random_box(rng, 200.0, 10.0, 60.0), rng.random_range(0.0..=1.0), rng.random_range(0..classes))
                    .unwrap()
            }
        })
        .collect();
    FrameDetections::new(0, dets)
}

/// Exhaustive search over one-to-one matchings of eligible pairs
/// (`IoU > min_overlap`, equal classes) for the largest total IoU.
pub fn brute_force_matching(gt: &FrameDetections, pd: &FrameDetections, min_overlap: f64) -> Vec<(usize, usize)> {
    let n_gt = gt.len();
    let n_pd = pd.len();
    let mut eligible = vec![vec![None; n_pd]; n_gt];
    for i in 0..n_gt {
        for j in 0..n_pd {
            let (g, p) = (&gt.detections[i], &pd.detections[j]);
            let v = iou(g.bbox(), p.bbox());
            if g.class_id() == p.class_id() && v > min_overlap {
                eligible[i][j] = Some(v);
            }
        }
    }

    fn search(
        i: usize,
        eligible: &[Vec<Option<f64>>],
        used: &mut Vec<bool>,
        current: &mut Vec<(usize, usize)>,
        total: f64,
        best: &mut (f64, Vec<(usize, usize)>),
    ) {
        if i == eligible.len() {
            if total > best.0 {
                *best = (total, current.clone());
            }
            return;
        }
        search(i + 1, eligible, used, current, total, best);
        for j in 0..used.len() {
            if let (false, Some(v)) = (used[j], eligible[i][j]) {
                used[j] = true;
                current.push((i, j));
                search(i + 1, eligible, used, current, total + v, best);
                current.pop();
                used[j] = false;
            }
        }
    }

    let mut best = (-1.0, Vec::new());
    search(0, &eligible, &mut vec![false; n_pd], &mut Vec::new(), 0.0, &mut best);
    let mut pairs = best.1;
    pairs.sort();
    pairs
}

/// All eligible IoU values are pairwise distinct.
pub fn eligible_ious_distinct(gt: &FrameDetections, pd: &FrameDetections, min_overlap: f64) -> bool {
    let mut v: Vec<f64> = Vec::new();
    for g in &gt.detections {
        for p in &pd.detections {
            let x = iou(g.bbox(), p.bbox());
            if g.class_id() == p.class_id() && x > min_overlap {
                v.push(x);
            }
        }
    }
    v.sort_by(f64::total_cmp);
    v.windows(2).all(|w| w[0] != w[1])
}

/// Alarm at `t` iff frames `t-window+1..=t` all exist and are strictly above `theta`.
pub fn sliding_window_oracle(distances: &[f64], theta: f64, window: usize) -> Vec<bool> {
    (0..distances.len())
        .map(|t| t + 1 >= window && distances[t + 1 - window..=t].iter().all(|&d| d > theta))
        .collect()
}

/// Average precision by tabulating every precision-recall point: for each
/// recall level k/n take the best precision among cutoffs reaching it.
pub fn brute_force_ap(hits: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut table = Vec::new();
    let mut tp = 0;
    for (k, &h) in hits.iter().enumerate() {
        tp += usize::from(h);
        table.push((tp, tp as f64 / (k + 1) as f64));
    }
    (1..=n_gt)
        .map(|level| {
            table
                .iter()
                .filter(|(tp, _)| *tp >= level)
                .map(|(_, p)| *p)
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / n_gt as f64
}

/// Frame-pair mAP computed from scratch: per reference class, rank
/// predictions by confidence, label them against unclaimed references, and
/// average the per-class AP (prediction-only classes count as 0).
pub fn brute_force_map(gt: &FrameDetections, pd: &FrameDetections, min_overlap: f64) -> f64 {
    if gt.is_empty() && pd.is_empty() {
        return 1.0;
    }
    let mut gt_classes: Vec<u32> = gt.detections.iter().map(|d| d.class_id()).collect();
    gt_classes.sort();
    gt_classes.dedup();
    let mut pd_only: Vec<u32> = pd
        .detections
        .iter()
        .map(|d| d.class_id())
        .filter(|c| !gt_classes.contains(c))
        .collect();
    pd_only.sort();
    pd_only.dedup();
    let mut sum = 0.0;
    for &c in &gt_classes {
        let refs: Vec<&Detection> = gt.detections.iter().filter(|d| d.class_id() == c).collect();
        let mut preds: Vec<&Detection> = pd.detections.iter().filter(|d| d.class_id() == c).collect();
        preds.sort_by(|a, b| b.confidence().partial_cmp(&a.confidence()).unwrap());
        let mut claimed = vec![false; refs.len()];
        let mut hits = Vec::new();
        for p in preds {
            let mut best: Option<(usize, f64)> = None;
            for (k, r) in refs.iter().enumerate() {
                let v = iou(r.bbox(), p.bbox());
                if !claimed[k] && v > min_overlap && best.is_none_or(|(_, b)| v > b) {
                    best = Some((k, v));
                }
            }
            if let Some((k, _)) = best {
                claimed[k] = true;
            }
            hits.push(best.is_some());
        }
        sum += brute_force_ap(&hits, refs.len());
    }
    sum / (gt_classes.len() + pd_only.len()) as f64
}

pub fn random_image(rng: &mut ChaCha8Rng, max_side: u32) -> ImageBuffer {
    let w = rng.random_range(1..=max_side);
    let h = rng.random_range(1..=max_side);
    let pixels = (0..w * h * 3).map(|_| rng.random::<u8>()).collect();
    ImageBuffer::new(w, h, pixels).unwrap()
}
