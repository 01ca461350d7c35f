//! Synthetic labeled sequences: constant-velocity objects rendered as detector
//! output on the original frame and on its squeezed counterpart, with benign
//! squeeze jitter and adversarial segments injected at the detection level.
//!
//! On an adversarial frame the original detections carry the attack effect
//! (a target suppressed, shifted or relabeled) while the squeezed detections
//! show the clean scene. Benign frames differ only by jitter: small boxes are
//! perturbed harder and may vanish, and an occasional single-frame spike
//! removes a large object from the squeezed output, which looks like a
//! suppression attack to any single-frame test.

use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FramePair, LabeledSequence};
use crate::error::{Error, Result};
use crate::model::{validate_frame, DetectionRecord, FrameRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    /// Independent video streams generated from the same spec.
    #[serde(default = "one")]
    pub streams: usize,
    pub n_frames: usize,
    pub image_width: u32,
    pub image_height: u32,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub random_objects: Option<RandomObjects>,
    #[serde(default)]
    pub jitter: JitterSpec,
    #[serde(default)]
    pub attacks: Vec<AttackSegment>,
    #[serde(default)]
    pub random_attacks: Option<RandomAttacks>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub class_id: u32,
    /// Box at frame 0, corner format.
    pub bbox: [f64; 4],
    /// Pixels per frame; reflected at the image border.
    #[serde(default)]
    pub velocity: [f64; 2],
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_confidence() -> f64 {
    0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomObjects {
    pub count: usize,
    pub classes: u32,
    /// Fraction of objects drawn from `small_size` instead of `large_size`.
    pub small_fraction: f64,
    pub small_size: [f64; 2],
    pub large_size: [f64; 2],
    pub max_speed: f64,
    pub confidence: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JitterSpec {
    /// Edge noise of the detector on the original frame, relative to box size.
    pub detector_box_sigma: f64,
    /// Extra edge noise on the squeezed frame for boxes at or above `small_area`.
    pub squeeze_box_sigma: f64,
    /// Extra edge noise on the squeezed frame for boxes below `small_area`.
    pub small_box_sigma: f64,
    pub small_area: f64,
    pub confidence_sigma: f64,
    /// Probability that a small box disappears under squeezing.
    pub small_dropout: f64,
    /// Per-frame probability that the squeezed output loses one large object.
    pub spike_prob: f64,
}

impl Default for JitterSpec {
    fn default() -> Self {
        Self {
            detector_box_sigma: 0.0,
            squeeze_box_sigma: 0.0,
            small_box_sigma: 0.0,
            small_area: 0.0,
            confidence_sigma: 0.0,
            small_dropout: 0.0,
            spike_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// Targets vanish from the original-frame detections.
    Suppress,
    /// Targets are displaced by about half their size.
    Shift,
    /// Targets are reported with another class id.
    ClassFlip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSegment {
    pub start: usize,
    pub length: usize,
    pub kind: AttackKind,
    /// Number of objects hit, largest first.
    #[serde(default = "one")]
    pub targets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomAttacks {
    pub count: usize,
    pub min_length: usize,
    pub max_length: usize,
    pub kinds: Vec<AttackKind>,
    #[serde(default = "one")]
    pub targets: usize,
    /// Minimum number of benign frames between two segments.
    #[serde(default = "one")]
    pub min_gap: usize,
}

const BUILTINS: &[(&str, &str)] = &[
    ("default", include_str!("../../scenarios/default.json")),
    ("small-object-jitter", include_str!("../../scenarios/small-object-jitter.json")),
];

impl ScenarioSpec {
    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTINS.iter().map(|(n, _)| *n)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let (_, text) = BUILTINS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown builtin scenario `{name}`")))?;
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::json(format!("builtin:{name}"), e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        spec.validate()?;
        Ok(spec)
    }

    /// `builtin:NAME` or a path to a JSON spec.
    pub fn resolve(source: &str) -> Result<Self> {
        match source.strip_prefix("builtin:") {
            Some(name) => Self::builtin(name),
            None => Self::from_file(source),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("scenario `{}`: {m}", self.name)));
        if self.n_frames == 0 || self.streams == 0 {
            return bad("n_frames and streams must be positive".into());
        }
        if self.image_width == 0 || self.image_height == 0 {
            return bad("image size must be positive".into());
        }
        for o in &self.objects {
            let [x1, y1, x2, y2] = o.bbox;
            if !(x1 < x2 && y1 < y2) || !(0.0..=1.0).contains(&o.confidence) {
                return bad(format!("invalid object {o:?}"));
            }
        }
        if let Some(r) = &self.random_objects {
            if r.classes == 0
                || !(0.0..=1.0).contains(&r.small_fraction)
                || !(0.0 < r.small_size[0] && r.small_size[0] <= r.small_size[1])
                || !(0.0 < r.large_size[0] && r.large_size[0] <= r.large_size[1])
                || !(0.0 <= r.confidence[0] && r.confidence[0] <= r.confidence[1] && r.confidence[1] <= 1.0)
                || r.max_speed < 0.0
            {
                return bad("invalid random_objects".into());
            }
        }
        let j = &self.jitter;
        for (name, p) in [
            ("small_dropout", j.small_dropout),
            ("spike_prob", j.spike_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be a probability"));
            }
        }
        for a in &self.attacks {
            if a.length == 0 || a.start + a.length > self.n_frames {
                return bad(format!("attack segment {a:?} outside the sequence"));
            }
        }
        if let Some(r) = &self.random_attacks {
            if r.min_length == 0 || r.min_length > r.max_length || r.kinds.is_empty() {
                return bad("invalid random_attacks".into());
            }
        }
        Ok(())
    }
}

struct Object {
    class_id: u32,
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    vx: f64,
    vy: f64,
    confidence: f64,
}

impl Object {
    fn advance(&mut self, width: f64, height: f64) {
        self.cx += self.vx;
        self.cy += self.vy;
        if self.cx - self.w / 2.0 < 0.0 || self.cx + self.w / 2.0 > width {
            self.vx = -self.vx;
            self.cx = self.cx.clamp(self.w / 2.0, (width - self.w / 2.0).max(self.w / 2.0));
        }
        if self.cy - self.h / 2.0 < 0.0 || self.cy + self.h / 2.0 > height {
            self.vy = -self.vy;
            self.cy = self.cy.clamp(self.h / 2.0, (height - self.h / 2.0).max(self.h / 2.0));
        }
    }

    fn area(&self) -> f64 {
        self.w * self.h
    }
}

fn uniform(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("positive sigma").sample(rng)
    } else {
        0.0
    }
}

fn spawn_objects(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Vec<Object> {
    let mut objects: Vec<Object> = spec
        .objects
        .iter()
        .map(|o| {
            let [x1, y1, x2, y2] = o.bbox;
            Object {
                class_id: o.class_id,
                cx: (x1 + x2) / 2.0,
                cy: (y1 + y2) / 2.0,
                w: x2 - x1,
                h: y2 - y1,
                vx: o.velocity[0],
                vy: o.velocity[1],
                confidence: o.confidence,
            }
        })
        .collect();
    if let Some(r) = &spec.random_objects {
        let (iw, ih) = (f64::from(spec.image_width), f64::from(spec.image_height));
        for _ in 0..r.count {
            let range = if rng.random_bool(r.small_fraction) {
                r.small_size
            } else {
                r.large_size
            };
            let w = uniform(rng, range).min(iw);
            let h = (w * uniform(rng, [0.6, 1.4])).min(ih);
            objects.push(Object {
                class_id: rng.random_range(0..r.classes),
                cx: uniform(rng, [w / 2.0, iw - w / 2.0]),
                cy: uniform(rng, [h / 2.0, ih - h / 2.0]),
                w,
                h,
                vx: uniform(rng, [-r.max_speed, r.max_speed]),
                vy: uniform(rng, [-r.max_speed, r.max_speed]),
                confidence: uniform(rng, r.confidence),
            });
        }
    }
    objects
}

fn place_attacks(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Vec<AttackSegment> {
    let mut segments = spec.attacks.clone();
    let Some(r) = &spec.random_attacks else {
        return segments;
    };
    let n = spec.n_frames;
    let overlaps = |segs: &[AttackSegment], s: usize, len: usize, gap: usize| {
        segs.iter()
            .any(|a| s < a.start + a.length + gap && a.start < s + len + gap)
    };
    for _ in 0..r.count {
        // bounded rejection sampling; a crowded spec just gets fewer segments
        for _ in 0..1000 {
            let len = rng.random_range(r.min_length..=r.max_length);
            if len > n {
                break;
            }
            let start = rng.random_range(0..=n - len);
            if !overlaps(&segments, start, len, r.min_gap) {
                let kind = *r.kinds.choose(rng).expect("kinds is non-empty");
                segments.push(AttackSegment {
                    start,
                    length: len,
                    kind,
                    targets: r.targets,
                });
                break;
            }
        }
    }
    segments.sort_by_key(|a| a.start);
    segments
}

/// Detector rendering of one object: corner box and confidence.
#[derive(Clone, Copy)]
struct Rendered {
    obj: usize,
    bbox: [f64; 4],
    confidence: f64,
    class_id: u32,
}

fn jitter_box(b: [f64; 4], rel_sigma: f64, rng: &mut ChaCha8Rng) -> [f64; 4] {
    if rel_sigma <= 0.0 {
        return b;
    }
    let (w, h) = (b[2] - b[0], b[3] - b[1]);
    [
        b[0] + gauss(rng, rel_sigma * w),
        b[1] + gauss(rng, rel_sigma * h),
        b[2] + gauss(rng, rel_sigma * w),
        b[3] + gauss(rng, rel_sigma * h),
    ]
}

fn to_record(frame_id: u64, dets: &[Rendered]) -> FrameRecord {
    FrameRecord {
        frame_id,
        detections: dets
            .iter()
            .map(|r| DetectionRecord {
                bbox: r.bbox,
                confidence: r.confidence,
                class_id: r.class_id,
            })
            .collect(),
    }
}

/// Generates one labeled stream. `stream` selects an independent random
/// stream for the same seed.
pub fn generate_stream(spec: &ScenarioSpec, seed: u64, stream: u64) -> Result<LabeledSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);

    let mut objects = spawn_objects(spec, &mut rng);
    let segments = place_attacks(spec, &mut rng);
    let (iw, ih) = (f64::from(spec.image_width), f64::from(spec.image_height));
    let j = spec.jitter;
    let n_classes = spec
        .random_objects
        .map(|r| r.classes)
        .unwrap_or(0)
        .max(objects.iter().map(|o| o.class_id + 1).max().unwrap_or(1))
        .max(2);

    let mut labels = vec![false; spec.n_frames];
    for s in &segments {
        labels[s.start..s.start + s.length].fill(true);
    }

    let mut frames = Vec::with_capacity(spec.n_frames);
    for t in 0..spec.n_frames {
        if t > 0 {
            for o in &mut objects {
                o.advance(iw, ih);
            }
        }
        let benign: Vec<Rendered> = objects
            .iter()
            .enumerate()
            .map(|(k, o)| {
                let b = [o.cx - o.w / 2.0, o.cy - o.h / 2.0, o.cx + o.w / 2.0, o.cy + o.h / 2.0];
                Rendered {
                    obj: k,
                    bbox: jitter_box(b, j.detector_box_sigma, &mut rng),
                    confidence: (o.confidence + gauss(&mut rng, j.confidence_sigma)).clamp(0.0, 1.0),
                    class_id: o.class_id,
                }
            })
            .collect();

        // squeezed view of the clean scene
        let mut squeezed = Vec::with_capacity(benign.len());
        for r in &benign {
            let small = objects[r.obj].area() < j.small_area;
            if small && rng.random_bool(j.small_dropout) {
                continue;
            }
            let sigma = if small { j.small_box_sigma } else { j.squeeze_box_sigma };
            squeezed.push(Rendered {
                bbox: jitter_box(r.bbox, sigma, &mut rng),
                confidence: (r.confidence + gauss(&mut rng, j.confidence_sigma)).clamp(0.0, 1.0),
                ..*r
            });
        }
        if !squeezed.is_empty() && rng.random_bool(j.spike_prob) {
            let k = (0..squeezed.len())
                .max_by(|&a, &b| {
                    objects[squeezed[a].obj]
                        .area()
                        .total_cmp(&objects[squeezed[b].obj].area())
                        .then(b.cmp(&a))
                })
                .expect("non-empty");
            squeezed.remove(k);
        }

        let mut original = benign;
        if let Some(seg) = segments.iter().find(|s| (s.start..s.start + s.length).contains(&t)) {
            let mut by_size: Vec<usize> = (0..original.len()).collect();
            by_size.sort_by(|&a, &b| {
                objects[original[b].obj]
                    .area()
                    .total_cmp(&objects[original[a].obj].area())
                    .then(a.cmp(&b))
            });
            let targets: Vec<usize> = by_size.into_iter().take(seg.targets).collect();
            match seg.kind {
                AttackKind::Suppress => {
                    let mut k = 0;
                    original.retain(|_| {
                        let keep = !targets.contains(&k);
                        k += 1;
                        keep
                    });
                }
                AttackKind::Shift => {
                    for &k in &targets {
                        let b = &mut original[k].bbox;
                        let (w, h) = (b[2] - b[0], b[3] - b[1]);
                        let angle = rng.random_range(0.0..std::f64::consts::TAU);
                        let (dx, dy) = (0.5 * w * angle.cos(), 0.5 * h * angle.sin());
                        *b = [b[0] + dx, b[1] + dy, b[2] + dx, b[3] + dy];
                    }
                }
                AttackKind::ClassFlip => {
                    for &k in &targets {
                        let c = original[k].class_id;
                        original[k].class_id = (c + 1 + rng.random_range(0..n_classes - 1)) % n_classes;
                    }
                }
            }
        }

        let frame_id = t as u64;
        let original = validate_frame(&to_record(frame_id, &original), spec.image_width, spec.image_height)?.frame;
        let squeezed = validate_frame(&to_record(frame_id, &squeezed), spec.image_width, spec.image_height)?.frame;
        frames.push(FramePair { original, squeezed });
    }

    Ok(LabeledSequence {
        stream_id: format!("{}-{stream}", spec.name),
        frames,
        labels,
    })
}

/// First stream of the scenario.
pub fn generate_scenario(spec: &ScenarioSpec, seed: u64) -> Result<LabeledSequence> {
    generate_stream(spec, seed, 0)
}

/// All `spec.streams` streams.
pub fn generate_suite(spec: &ScenarioSpec, seed: u64) -> Result<Vec<LabeledSequence>> {
    (0..spec.streams as u64)
        .map(|s| generate_stream(spec, seed, s))
        .collect()
}
