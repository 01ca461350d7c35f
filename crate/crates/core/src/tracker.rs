//! Constant-velocity Kalman multi-object tracker with reserved-age deletion.
//!
//! State is `(cx, cy, w, h, vcx, vcy, vw, vh)` in pixels and pixels/frame; the
//! measurement is the detected box as `(cx, cy, w, h)`. Association is greedy
//! on IoU between predicted boxes and detections and ignores class labels.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::iou;
use crate::model::{BBox, Detection, FrameDetections};

pub type State = SVector<f64, 8>;
pub type Covariance = SMatrix<f64, 8, 8>;
type Measurement = SVector<f64, 4>;

/// Smallest width/height a reported box may have.
const MIN_SIZE: f64 = 1e-3;
/// Initial position variance, in units of the measurement noise.
const INIT_POSITION_VAR: f64 = 10.0;
/// Initial velocity variance, in units of the measurement noise.
const INIT_VELOCITY_VAR: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Consecutive missed frames after which a track is deleted.
    pub reserved_age: u32,
    pub assoc_min_iou: f64,
    pub process_noise: f64,
    pub measurement_noise: f64,
    pub min_hits_to_confirm: u32,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            reserved_age: 3,
            assoc_min_iou: 0.3,
            process_noise: 1.0,
            measurement_noise: 1.0,
            min_hits_to_confirm: 1,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reserved_age == 0 {
            return Err(Error::InvalidConfig("reserved_age must be at least 1".into()));
        }
        if !(self.assoc_min_iou > 0.0 && self.assoc_min_iou < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "assoc_min_iou must be in (0, 1), got {}",
                self.assoc_min_iou
            )));
        }
        for (name, v) in [
            ("process_noise", self.process_noise),
            ("measurement_noise", self.measurement_noise),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

fn transition() -> Covariance {
    let mut f = Covariance::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

fn observation() -> SMatrix<f64, 4, 8> {
    SMatrix::<f64, 4, 8>::identity()
}

fn to_measurement(b: &BBox) -> Measurement {
    let (cx, cy) = b.center();
    Measurement::new(cx, cy, b.width(), b.height())
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanTrack {
    pub id: u64,
    pub state: State,
    pub covariance: Covariance,
    /// Consecutive frames without an associated detection.
    pub misses: u32,
    /// Frames since creation.
    pub age: u32,
    pub hits: u32,
    pub class_id: u32,
    pub confidence: f64,
}

impl KalmanTrack {
    /// New track at the detection's box with zero velocity.
    pub fn new(id: u64, det: &Detection, measurement_noise: f64) -> Self {
        let mut state = State::zeros();
        state.fixed_rows_mut::<4>(0).copy_from(&to_measurement(det.bbox()));
        let mut covariance = Covariance::zeros();
        for i in 0..4 {
            covariance[(i, i)] = INIT_POSITION_VAR * measurement_noise;
            covariance[(i + 4, i + 4)] = INIT_VELOCITY_VAR * measurement_noise;
        }
        Self {
            id,
            state,
            covariance,
            misses: 0,
            age: 0,
            hits: 1,
            class_id: det.class_id(),
            confidence: det.confidence(),
        }
    }

    /// Current box estimate, with width and height floored to stay valid.
    pub fn bbox(&self) -> BBox {
        let s = &self.state;
        BBox::from_center_size(s[0], s[1], s[2].max(MIN_SIZE), s[3].max(MIN_SIZE))
            .expect("finite state yields a valid box")
    }

    pub fn position_variance(&self) -> f64 {
        (0..4).map(|i| self.covariance[(i, i)]).sum()
    }

    /// Constant-velocity prediction with additive diagonal process noise.
    pub fn predict(&mut self, process_noise: f64) {
        let f = transition();
        self.state = f * self.state;
        let p = f * self.covariance * f.transpose() + Covariance::identity() * process_noise;
        self.covariance = (p + p.transpose()) * 0.5;
        self.age += 1;
    }

    /// Kalman update with a box measurement (Joseph form).
    pub fn update(&mut self, meas: &BBox, measurement_noise: f64) {
        let h = observation();
        let r = SMatrix::<f64, 4, 4>::identity() * measurement_noise;
        let innovation = to_measurement(meas) - h * self.state;
        let s = h * self.covariance * h.transpose() + r;
        let s_inv = s
            .try_inverse()
            .expect("innovation covariance is positive definite");
        let k = self.covariance * h.transpose() * s_inv;
        self.state += k * innovation;
        let i_kh = Covariance::identity() - k * h;
        let p = i_kh * self.covariance * i_kh.transpose() + k * r * k.transpose();
        self.covariance = (p + p.transpose()) * 0.5;
        self.misses = 0;
        self.hits += 1;
    }
}

pub fn predict(mut track: KalmanTrack, cfg: &TrackerConfig) -> KalmanTrack {
    track.predict(cfg.process_noise);
    track
}

pub fn update(mut track: KalmanTrack, meas: &BBox, cfg: &TrackerConfig) -> KalmanTrack {
    track.update(meas, cfg.measurement_noise);
    track
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackedBox {
    pub track_id: u64,
    pub bbox: BBox,
    pub confidence: f64,
    pub class_id: u32,
    /// 0 when the box was updated from a detection this frame.
    #[serde(skip)]
    pub misses: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedFrame {
    pub frame_id: u64,
    pub detections: Vec<TrackedBox>,
}

/// Tracker state for one video stream.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    tracks: Vec<KalmanTrack>,
    next_id: u64,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            tracks: Vec::new(),
            next_id: 0,
        })
    }

    pub fn tracks(&self) -> &[KalmanTrack] {
        &self.tracks
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    /// Predict, associate, update, spawn and delete; returns the boxes of
    /// confirmed live tracks.
    pub fn step(&mut self, frame: &FrameDetections) -> Vec<TrackedBox> {
        for t in &mut self.tracks {
            t.predict(self.cfg.process_noise);
        }

        let mut pairs = Vec::new();
        for (ti, t) in self.tracks.iter().enumerate() {
            let predicted = t.bbox();
            for (di, d) in frame.detections.iter().enumerate() {
                let v = iou(&predicted, d.bbox());
                if v >= self.cfg.assoc_min_iou {
                    pairs.push((v, ti, di));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut track_matched = vec![false; self.tracks.len()];
        let mut det_matched = vec![false; frame.len()];
        for (_, ti, di) in pairs {
            if track_matched[ti] || det_matched[di] {
                continue;
            }
            track_matched[ti] = true;
            det_matched[di] = true;
            let d = &frame.detections[di];
            let t = &mut self.tracks[ti];
            t.update(d.bbox(), self.cfg.measurement_noise);
            t.class_id = d.class_id();
            t.confidence = d.confidence();
        }

        for (t, matched) in self.tracks.iter_mut().zip(&track_matched) {
            if !matched {
                t.misses += 1;
            }
        }
        let reserved_age = self.cfg.reserved_age;
        self.tracks.retain(|t| t.misses < reserved_age);

        for (d, matched) in frame.detections.iter().zip(&det_matched) {
            if !matched {
                self.tracks
                    .push(KalmanTrack::new(self.next_id, d, self.cfg.measurement_noise));
                self.next_id += 1;
            }
        }

        self.tracks
            .iter()
            .filter(|t| t.hits >= self.cfg.min_hits_to_confirm)
            .map(|t| TrackedBox {
                track_id: t.id,
                bbox: t.bbox(),
                confidence: t.confidence,
                class_id: t.class_id,
                misses: t.misses,
            })
            .collect()
    }

    pub fn run(&mut self, frames: &[FrameDetections]) -> Vec<TrackedFrame> {
        frames
            .iter()
            .map(|f| TrackedFrame {
                frame_id: f.frame_id,
                detections: self.step(f),
            })
            .collect()
    }
}

/// Functional form: advances `tracks` by one frame. `next_id` supplies fresh ids.
pub fn tracker_step(
    tracks: Vec<KalmanTrack>,
    frame: &FrameDetections,
    cfg: &TrackerConfig,
    next_id: &mut u64,
) -> (Vec<KalmanTrack>, Vec<TrackedBox>) {
    let mut t = Tracker {
        cfg: *cfg,
        tracks,
        next_id: *next_id,
    };
    let out = t.step(frame);
    *next_id = t.next_id;
    (t.tracks, out)
}
