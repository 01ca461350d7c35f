//! Temporal consistency rule: alarm only once the frame distance has stayed
//! strictly above the threshold for a whole window of consecutive frames.
//!
//! A distance equal to the threshold counts as below it. With `window = 1`
//! this reduces to plain per-frame thresholding.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemporalConfig {
    pub theta: f64,
    pub window: usize,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        Self {
            theta: 0.1,
            window: 3,
        }
    }
}

impl TemporalConfig {
    pub fn new(theta: f64, window: usize) -> Result<Self> {
        let cfg = Self { theta, window };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidConfig("window must be at least 1".into()));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidConfig(format!("theta must be non-negative, got {}", self.theta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TemporalState {
    recent: VecDeque<f64>,
    /// Length of the current run of above-threshold frames, capped at the window.
    run: usize,
    frames_seen: u64,
}

impl TemporalState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    pub fn recent(&self) -> impl Iterator<Item = f64> + '_ {
        self.recent.iter().copied()
    }

    /// Pushes one distance and reports whether the alarm is raised at this frame.
    pub fn step(&mut self, d: f64, cfg: &TemporalConfig) -> bool {
        if self.recent.len() == cfg.window {
            self.recent.pop_front();
        }
        self.recent.push_back(d);
        self.frames_seen += 1;
        self.run = if d > cfg.theta { (self.run + 1).min(cfg.window) } else { 0 };
        self.run == cfg.window
    }
}

/// Value-style wrapper around [`TemporalState::step`].
pub fn step(mut state: TemporalState, d: f64, cfg: &TemporalConfig) -> (TemporalState, bool) {
    let alarm = state.step(d, cfg);
    (state, alarm)
}

pub fn run_sequence(distances: &[f64], cfg: &TemporalConfig) -> Vec<bool> {
    let mut state = TemporalState::new();
    distances.iter().map(|&d| state.step(d, cfg)).collect()
}
