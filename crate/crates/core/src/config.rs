//! Resolved run configuration: defaults, then a TOML file, then flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{Metric, ThetaRange};
use crate::model::MetricConfig;
use crate::temporal::TemporalConfig;
use crate::tracker::TrackerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub metric: Metric,
    pub seed: u64,
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
    pub detector_timeout_secs: f64,
    pub thetas: ThetaRange,
    pub metric_params: MetricConfig,
    pub temporal: TemporalConfig,
    pub tracker: TrackerConfig,
    /// Input and output paths of the run, filled from flags.
    pub io: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            metric: Metric::Wap,
            seed: 0,
            jobs: None,
            detector_timeout_secs: 60.0,
            thetas: ThetaRange::default(),
            metric_params: MetricConfig::default(),
            temporal: TemporalConfig::default(),
            tracker: TrackerConfig::default(),
            io: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.metric_params.validate()?;
        self.temporal.validate()?;
        self.tracker.validate()?;
        if self.jobs == Some(0) {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        if !(self.detector_timeout_secs > 0.0 && self.detector_timeout_secs.is_finite()) {
            return Err(Error::InvalidConfig("detector_timeout_secs must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// Reproducibility header: tool version, seed and the full resolved config.
    pub fn header(&self) -> String {
        format!(
            "wapdet {} seed={}\n{}",
            env!("CARGO_PKG_VERSION"),
            self.seed,
            self.to_toml()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig = toml::from_str("seed = 5\n[temporal]\nwindow = 4\n").unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.temporal.window, 4);
        assert_eq!(cfg.temporal.theta, TemporalConfig::default().theta);
        assert_eq!(cfg.metric_params, MetricConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.io.insert("out".into(), "roc.csv".into());
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 5\n").is_err());
    }
}
