//! Evaluation pipeline: score (original, squeezed) detection pairs, run the
//! temporal detector across a threshold sweep and tally accuracy against
//! per-frame labels.

pub mod external;
pub mod images;
pub mod scenario;

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::map_distance;
use crate::model::{FrameDetections, MetricConfig};
use crate::temporal::{run_sequence, TemporalConfig};
use crate::wap::wap_distance;

pub use scenario::{generate_scenario, generate_stream, generate_suite, ScenarioSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct FramePair {
    /// Detections on the frame as received.
    pub original: FrameDetections,
    /// Detections on the squeezed frame.
    pub squeezed: FrameDetections,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub stream_id: String,
    pub frames: Vec<FramePair>,
    /// `true` marks an adversarial frame.
    pub labels: Vec<bool>,
}

impl LabeledSequence {
    pub fn new(stream_id: impl Into<String>, frames: Vec<FramePair>, labels: Vec<bool>) -> Result<Self> {
        if frames.len() != labels.len() {
            return Err(Error::Malformed(format!(
                "{} frames but {} labels",
                frames.len(),
                labels.len()
            )));
        }
        Ok(Self {
            stream_id: stream_id.into(),
            frames,
            labels,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Wap,
    Map,
}

impl Metric {
    pub fn distance(&self, gt: &FrameDetections, pd: &FrameDetections, cfg: &MetricConfig) -> f64 {
        match self {
            Metric::Wap => wap_distance(gt, pd, cfg).total,
            Metric::Map => map_distance(gt, pd, cfg.min_overlap),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wap" => Ok(Metric::Wap),
            "map" => Ok(Metric::Map),
            other => Err(Error::InvalidConfig(format!("unknown metric `{other}`, expected wap or map"))),
        }
    }
}

/// Per-frame distance between detections on `x_t` and on its squeezed version.
pub fn score_sequence(seq: &LabeledSequence, metric: Metric, cfg: &MetricConfig) -> Vec<f64> {
    seq.frames
        .par_iter()
        .map(|p| metric.distance(&p.original, &p.squeezed, cfg))
        .collect()
}

/// Distances and labels of one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredStream {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

pub fn score_suite(suite: &[LabeledSequence], metric: Metric, cfg: &MetricConfig) -> Vec<ScoredStream> {
    suite
        .iter()
        .map(|s| ScoredStream {
            scores: score_sequence(s, metric, cfg),
            labels: s.labels.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub theta: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, alarm: bool, label: bool) {
        match (alarm, label) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    fn rate(num: usize, den: usize) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn tpr(&self) -> f64 {
        Self::rate(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> f64 {
        Self::rate(self.fp, self.fp + self.tn)
    }

    pub fn accuracy(&self) -> f64 {
        Self::rate(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_)
    }
}

/// Runs the temporal detector on every stream for each threshold. Each stream
/// keeps its own detector state; counts are pooled over all frames.
pub fn sweep_thresholds(streams: &[ScoredStream], window: usize, thetas: &[f64]) -> Result<Vec<RocPoint>> {
    for s in streams {
        if s.scores.len() != s.labels.len() {
            return Err(Error::Malformed("scores and labels differ in length".into()));
        }
    }
    TemporalConfig::new(0.0, window)?;
    thetas
        .par_iter()
        .map(|&theta| {
            let cfg = TemporalConfig::new(theta, window)?;
            let mut c = Confusion::default();
            for s in streams {
                for (alarm, &label) in run_sequence(&s.scores, &cfg).into_iter().zip(&s.labels) {
                    c.add(alarm, label);
                }
            }
            Ok(RocPoint {
                theta,
                tpr: c.tpr(),
                fpr: c.fpr(),
                accuracy: c.accuracy(),
            })
        })
        .collect()
}

/// Highest-accuracy point; the lowest theta wins ties.
pub fn best_point(points: &[RocPoint]) -> Option<RocPoint> {
    points.iter().copied().fold(None, |best, p| match best {
        Some(b) if b.accuracy >= p.accuracy => Some(b),
        _ => Some(p),
    })
}

/// Inclusive arithmetic sweep, computed as `start + k * step` to avoid drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl ThetaRange {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.start + k as f64 * self.step).collect()
    }
}

impl Default for ThetaRange {
    fn default() -> Self {
        Self {
            start: 0.0,
            stop: 1.0,
            step: 0.005,
        }
    }
}

impl FromStr for ThetaRange {
    type Err = Error;

    /// Parses `start:stop:step`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("expected thetas as start:stop:step, got `{s}`"));
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0 && start >= 0.0 && stop >= start && stop.is_finite()) {
            return Err(bad());
        }
        Ok(Self { start, stop, step })
    }
}

pub const ROC_CSV_HEADER: &str = "theta,tpr,fpr,accuracy";

pub fn roc_to_csv(points: &[RocPoint]) -> String {
    let mut out = String::from(ROC_CSV_HEADER);
    out.push('\n');
    for p in points {
        writeln!(out, "{:.6},{:.6},{:.6},{:.6}", p.theta, p.tpr, p.fpr, p.accuracy).expect("write to String");
    }
    out
}

/// Parses a ROC CSV produced by [`roc_to_csv`].
pub fn roc_from_csv(text: &str) -> Result<Vec<RocPoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(ROC_CSV_HEADER) {
        return Err(Error::Malformed(format!("ROC CSV must start with `{ROC_CSV_HEADER}`")));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let v: Vec<f64> = l
                .split(',')
                .map(|x| x.parse().map_err(|_| Error::Malformed(format!("bad ROC row `{l}`"))))
                .collect::<Result<_>>()?;
            match v[..] {
                [theta, tpr, fpr, accuracy] => Ok(RocPoint { theta, tpr, fpr, accuracy }),
                _ => Err(Error::Malformed(format!("bad ROC row `{l}`"))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_scores_are_perfect() {
        let s = ScoredStream {
            scores: vec![0.0, 0.0, 1.0, 1.0, 0.0],
            labels: vec![false, false, true, true, false],
        };
        let pts = sweep_thresholds(&[s], 1, &[0.5]).unwrap();
        assert_eq!(pts[0].accuracy, 1.0);
        assert_eq!(pts[0].tpr, 1.0);
        assert_eq!(pts[0].fpr, 0.0);
    }

    #[test]
    fn theta_above_max_never_alarms() {
        let s = ScoredStream {
            scores: vec![0.1, 0.9, 0.3],
            labels: vec![false, true, true],
        };
        let p = sweep_thresholds(&[s], 1, &[2.0]).unwrap()[0];
        assert_eq!((p.tpr, p.fpr), (0.0, 0.0));
        assert!((p.accuracy - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn theta_range_is_inclusive() {
        let r: ThetaRange = "0:1:0.25".parse().unwrap();
        assert_eq!(r.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(ThetaRange::default().values().len(), 201);
        assert!("1:0:0.1".parse::<ThetaRange>().is_err());
        assert!("0:1".parse::<ThetaRange>().is_err());
    }

    #[test]
    fn csv_formatting() {
        let csv = roc_to_csv(&[RocPoint {
            theta: 0.1,
            tpr: 1.0,
            fpr: 0.0,
            accuracy: 2.0 / 3.0,
        }]);
        assert_eq!(csv, "theta,tpr,fpr,accuracy\n0.100000,1.000000,0.000000,0.666667\n");
        assert_eq!(roc_from_csv(&csv).unwrap().len(), 1);
    }

    #[test]
    fn mismatched_labels_are_rejected() {
        assert!(LabeledSequence::new("s", vec![], vec![true]).is_err());
        let s = ScoredStream {
            scores: vec![0.1],
            labels: vec![],
        };
        assert!(sweep_thresholds(&[s], 1, &[0.0]).is_err());
    }

    #[test]
    fn best_point_prefers_lowest_theta_on_ties() {
        let p = |theta, accuracy| RocPoint {
            theta,
            tpr: 0.0,
            fpr: 0.0,
            accuracy,
        };
        assert_eq!(best_point(&[p(0.1, 0.5), p(0.2, 0.7), p(0.3, 0.7)]).unwrap().theta, 0.2);
        assert!(best_point(&[]).is_none());
    }
}
