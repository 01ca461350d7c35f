//! Image-sequence input for a real detector.
//!
//! A manifest lists image files with per-frame labels. Adversarial frames are
//! either supplied pre-attacked (e.g. white-box attacks produced elsewhere) or
//! attacked here with `attack`. Every frame is run through the detector as is
//! and after squeezing.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::external::{run_external_detector, DetectorCommand};
use super::{FramePair, LabeledSequence};
use crate::error::{Error, Result};
use crate::model::ImageBuffer;
use crate::transforms::{AttackSpec, SqueezeSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageManifest {
    pub stream_id: String,
    /// Squeeze as `bitN`.
    pub squeeze: String,
    /// Applied to frames labeled adversarial before detection.
    #[serde(default)]
    pub attack: Option<AttackSpec>,
    pub frames: Vec<ImageFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageFrame {
    /// Relative paths resolve against the manifest's directory.
    pub image: PathBuf,
    #[serde(default)]
    pub adversarial: bool,
}

impl ImageManifest {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Self = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for f in &mut m.frames {
            if f.image.is_relative() {
                f.image = base.join(&f.image);
            }
        }
        Ok(m)
    }

    /// Whether a JSON file looks like an image manifest rather than a scenario spec.
    pub fn sniff(path: impl AsRef<Path>) -> bool {
        fs::read_to_string(path)
            .ok()
            .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
            .map(|v| v.get("frames").is_some() && v.get("squeeze").is_some())
            .unwrap_or(false)
    }
}

/// Runs the detector on each frame and its squeezed copy. Squeezed images are
/// written to `work_dir`.
pub fn detect_image_sequence(
    manifest: &ImageManifest,
    detector: &DetectorCommand,
    work_dir: &Path,
) -> Result<LabeledSequence> {
    let squeeze: SqueezeSpec = manifest.squeeze.parse()?;
    let frames = manifest
        .frames
        .par_iter()
        .enumerate()
        .map(|(t, f)| {
            let frame_id = t as u64;
            let mut img = ImageBuffer::load_png(&f.image)?;
            let mut original_path = f.image.clone();
            if let (true, Some(attack)) = (f.adversarial, &manifest.attack) {
                img = attack.apply(&img)?;
                original_path = work_dir.join(format!("{}_{t:06}_attacked.png", manifest.stream_id));
                img.save_png(&original_path)?;
            }
            let squeezed_path = work_dir.join(format!("{}_{t:06}_{squeeze}.png", manifest.stream_id));
            squeeze.apply(&img).save_png(&squeezed_path)?;
            let size = Some((img.width(), img.height()));
            let original = run_external_detector(&original_path, detector, frame_id, size)?;
            let squeezed = run_external_detector(&squeezed_path, detector, frame_id, size)?;
            Ok(FramePair { original, squeezed })
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledSequence::new(
        manifest.stream_id.clone(),
        frames,
        manifest.frames.iter().map(|f| f.adversarial).collect(),
    )
}
