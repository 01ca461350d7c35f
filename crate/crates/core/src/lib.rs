//! Adversarial-example detection for object detectors.
//!
//! Each frame is run through the detector twice, once as received and once
//! after bit-depth squeezing. The two detection sets are compared with a
//! frame distance ([`wap::wap_distance`], or the [`map::map_distance`]
//! baseline), and the [`temporal`] rule raises an alarm only when the distance
//! stays above a threshold for a window of consecutive frames. The [`tracker`]
//! module is a constant-velocity Kalman tracker used to check that detection
//! gaps shorter than its reserved age are absorbed by tracking.
//!
//! [`harness`] ties the pieces together: synthetic scenarios, an external
//! detector protocol, and threshold sweeps producing ROC points.

pub mod config;
pub mod error;
pub mod harness;
pub mod map;
pub mod matching;
pub mod model;
pub mod temporal;
pub mod tracker;
pub mod transforms;
pub mod wap;

pub use error::{DetectorError, Error, Result};
pub use harness::{LabeledSequence, Metric, RocPoint};
pub use matching::{iou, match_frames, symmetric_difference_area, MatchResult};
pub use model::{validate_frame, BBox, Detection, FrameDetections, ImageBuffer, MetricConfig};
pub use temporal::{TemporalConfig, TemporalState};
pub use tracker::{KalmanTrack, Tracker, TrackerConfig};
pub use wap::{wap_distance, weight_fn, DistanceBreakdown};
