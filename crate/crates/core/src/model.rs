//! Domain types shared by every stage of the pipeline, and the
//! detection-exchange JSON format.
//!
//! Boxes are corner-format `(x1, y1, x2, y2)` in pixels with the origin at the
//! top-left of the image, `x` growing right and `y` growing down. A valid box
//! has finite coordinates and strictly positive width and height.
//!
//! On the wire a frame looks like
//!
//! ```json
//! {"frame_id": 0, "detections": [{"bbox": [x1, y1, x2, y2], "confidence": 0.9, "class_id": 2}]}
//! ```
//!
//! and a sequence file is a JSON array of frames in strictly increasing
//! `frame_id` order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", try_from = "[f64; 4]")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(Error::Malformed(format!(
                "non-finite box coordinates ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        if !(x1 < x2 && y1 < y2) {
            return Err(Error::Malformed(format!(
                "box ({x1}, {y1}, {x2}, {y2}) has no area"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Builds a box from center, width and height.
    pub fn from_center_size(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Clips to `[0, width] x [0, height]`. `None` when nothing of the box
    /// remains inside the image.
    pub fn clamp_to(&self, width: f64, height: f64) -> Option<BBox> {
        let x1 = self.x1.clamp(0.0, width);
        let y1 = self.y1.clamp(0.0, height);
        let x2 = self.x2.clamp(0.0, width);
        let y2 = self.y2.clamp(0.0, height);
        BBox::new(x1, y1, x2, y2).ok()
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "DetectionRecord", try_from = "DetectionRecord")]
pub struct Detection {
    bbox: BBox,
    confidence: f64,
    class_id: u32,
}

impl Detection {
    pub fn new(bbox: BBox, confidence: f64, class_id: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Malformed(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Self {
            bbox,
            confidence,
            class_id,
        })
    }

    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn class_id(&self) -> u32 {
        self.class_id
    }
}

/// Detector output for one frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(into = "FrameRecord", try_from = "FrameRecord")]
pub struct FrameDetections {
    pub frame_id: u64,
    pub detections: Vec<Detection>,
}

impl FrameDetections {
    pub fn new(frame_id: u64, detections: Vec<Detection>) -> Self {
        Self {
            frame_id,
            detections,
        }
    }

    pub fn empty(frame_id: u64) -> Self {
        Self::new(frame_id, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.detections.iter().map(|d| d.bbox.area()).sum()
    }

    pub fn to_record(&self) -> FrameRecord {
        FrameRecord {
            frame_id: self.frame_id,
            detections: self.detections.iter().map(|&d| d.into()).collect(),
        }
    }
}

/// Unvalidated wire form of a detection, as an external detector might emit it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub bbox: [f64; 4],
    pub confidence: f64,
    pub class_id: u32,
}

impl From<Detection> for DetectionRecord {
    fn from(d: Detection) -> Self {
        Self {
            bbox: d.bbox.to_array(),
            confidence: d.confidence,
            class_id: d.class_id,
        }
    }
}

impl TryFrom<DetectionRecord> for Detection {
    type Error = Error;

    fn try_from(r: DetectionRecord) -> Result<Self> {
        Detection::new(BBox::try_from(r.bbox)?, r.confidence, r.class_id)
    }
}

/// Unvalidated wire form of a frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub detections: Vec<DetectionRecord>,
}

impl From<FrameDetections> for FrameRecord {
    fn from(f: FrameDetections) -> Self {
        f.to_record()
    }
}

impl TryFrom<FrameRecord> for FrameDetections {
    type Error = Error;

    fn try_from(r: FrameRecord) -> Result<Self> {
        let detections = r
            .detections
            .into_iter()
            .map(Detection::try_from)
            .collect::<Result<Vec<_>>>()?;
        Ok(FrameDetections::new(r.frame_id, detections))
    }
}

/// Result of [`validate_frame`]: the cleaned frame and what had to be fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub frame: FrameDetections,
    /// Detections removed because their (clamped) box had zero area.
    pub dropped: usize,
    /// Detections whose confidence was pulled back into `[0, 1]`.
    pub clamped_confidences: usize,
}

/// Clamps boxes to the image, drops detections left with zero area and clamps
/// confidences into `[0, 1]`. Non-finite numbers are rejected.
pub fn validate_frame(frame: &FrameRecord, image_w: u32, image_h: u32) -> Result<Validated> {
    validate_inner(frame, Some((image_w as f64, image_h as f64)))
}

/// Like [`validate_frame`] for frames whose image size is unknown: boxes are
/// not clipped, only degenerate ones are dropped.
pub fn validate_unbounded(frame: &FrameRecord) -> Result<Validated> {
    validate_inner(frame, None)
}

fn validate_inner(frame: &FrameRecord, bounds: Option<(f64, f64)>) -> Result<Validated> {
    let mut out = Vec::with_capacity(frame.detections.len());
    let mut dropped = 0;
    let mut clamped_confidences = 0;
    for (i, rec) in frame.detections.iter().enumerate() {
        let [x1, y1, x2, y2] = rec.bbox;
        if !(rec.bbox.iter().all(|v| v.is_finite()) && rec.confidence.is_finite()) {
            return Err(Error::Malformed(format!(
                "frame {}: detection {i} has non-finite values",
                frame.frame_id
            )));
        }
        let (x1, y1, x2, y2) = match bounds {
            Some((w, h)) => (x1.clamp(0.0, w), y1.clamp(0.0, h), x2.clamp(0.0, w), y2.clamp(0.0, h)),
            None => (x1, y1, x2, y2),
        };
        let Ok(bbox) = BBox::new(x1, y1, x2, y2) else {
            dropped += 1;
            continue;
        };
        let confidence = rec.confidence.clamp(0.0, 1.0);
        if confidence != rec.confidence {
            clamped_confidences += 1;
        }
        out.push(Detection {
            bbox,
            confidence,
            class_id: rec.class_id,
        });
    }
    if clamped_confidences > 0 {
        log::warn!(
            "frame {}: clamped {clamped_confidences} confidence value(s) into [0, 1]",
            frame.frame_id
        );
    }
    Ok(Validated {
        frame: FrameDetections::new(frame.frame_id, out),
        dropped,
        clamped_confidences,
    })
}

/// Hyperparameters of the weighted-AP frame distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    /// IoU a (gt, pd) pair must strictly exceed to count as a true positive.
    pub min_overlap: f64,
    /// Half-saturation point of the area weighting `x / (x + a)`.
    pub a: f64,
    /// Weight of the confidence-score terms.
    pub gamma_cs: f64,
    pub alpha_tp: f64,
    pub alpha_fp: f64,
    pub alpha_fn: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            min_overlap: 0.5,
            a: 0.5,
            gamma_cs: 0.1,
            alpha_tp: 1.0,
            alpha_fp: 1.0,
            alpha_fn: 1.0,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.min_overlap > 0.0 && self.min_overlap < 1.0) {
            return bad(format!("min_overlap must be in (0, 1), got {}", self.min_overlap));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return bad(format!("a must be positive, got {}", self.a));
        }
        if !(self.gamma_cs >= 0.0 && self.gamma_cs.is_finite()) {
            return bad(format!("gamma_cs must be non-negative, got {}", self.gamma_cs));
        }
        for (name, v) in [
            ("alpha_tp", self.alpha_tp),
            ("alpha_fp", self.alpha_fp),
            ("alpha_fn", self.alpha_fn),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.alpha_sum() <= 0.0 {
            return bad("alpha_tp + alpha_fp + alpha_fn must be positive".into());
        }
        Ok(())
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha_tp + self.alpha_fp + self.alpha_fn
    }
}

/// 8-bit RGB image, row-major, interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl ImageBuffer {
    pub const CHANNELS: usize = 3;

    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Malformed(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * Self::CHANNELS;
        if pixels.len() != expected {
            return Err(Error::Malformed(format!(
                "{width}x{height} RGB image needs {expected} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Result<Self> {
        Self::new(
            width,
            height,
            vec![value; width as usize * height as usize * Self::CHANNELS],
        )
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Applies `f` to every channel value, keeping dimensions.
    pub(crate) fn map_values(&self, mut f: impl FnMut(u8) -> u8) -> Self {
        Self {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.into_rgb8();
        let (w, h) = rgb.dimensions();
        Self::new(w, h, rgb.into_raw())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        image::save_buffer_with_format(
            path,
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Reads a file holding either a single frame object or an array of frames.
pub fn read_frame_records(path: impl AsRef<Path>) -> Result<Vec<FrameRecord>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(FrameRecord),
        Many(Vec<FrameRecord>),
    }

    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records = match serde_json::from_str(&text).map_err(|e| Error::json(path, e))? {
        OneOrMany::One(f) => vec![f],
        OneOrMany::Many(v) => v,
    };
    check_sequence_order(&records)?;
    Ok(records)
}

/// Reads a sequence file and validates every frame without image bounds.
pub fn read_sequence(path: impl AsRef<Path>) -> Result<Vec<FrameDetections>> {
    read_frame_records(path)?
        .iter()
        .map(|r| validate_unbounded(r).map(|v| v.frame))
        .collect()
}

pub fn check_sequence_order(records: &[FrameRecord]) -> Result<()> {
    for w in records.windows(2) {
        if w[1].frame_id <= w[0].frame_id {
            return Err(Error::Malformed(format!(
                "frame ids must be strictly increasing, found {} after {}",
                w[1].frame_id, w[0].frame_id
            )));
        }
    }
    Ok(())
}

/// Serializes a sequence in the exchange format (pretty-printed, trailing newline).
pub fn sequence_to_json(frames: &[FrameDetections]) -> String {
    let mut s = serde_json::to_string_pretty(frames).expect("frames always serialize");
    s.push('\n');
    s
}

pub fn write_sequence(path: impl AsRef<Path>, frames: &[FrameDetections]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, sequence_to_json(frames)).map_err(|e| Error::io(path, e))
}
