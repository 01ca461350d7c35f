//! External detector protocol.
//!
//! The detector is any executable. It is run once per image as
//! `<program> <args...> <image_path>` and must print one detection-exchange
//! frame object on stdout and exit 0. The `frame_id` it prints is ignored and
//! replaced by the caller's frame index. Boxes are clamped to the image.

use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use wait_timeout::ChildExt;

use crate::error::{DetectorError, Error, Result};
use crate::model::{validate_frame, validate_unbounded, FrameDetections, FrameRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorCommand {
    pub program: String,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl DetectorCommand {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

    /// Splits a shell-style command line (no shell is involved in running it).
    pub fn parse(cmdline: &str) -> Result<Self> {
        let mut words = shlex::split(cmdline)
            .ok_or_else(|| Error::InvalidConfig(format!("cannot parse detector command `{cmdline}`")))?;
        if words.is_empty() {
            return Err(Error::InvalidConfig("empty detector command".into()));
        }
        let program = words.remove(0);
        Ok(Self {
            program,
            args: words,
            timeout: Self::DEFAULT_TIMEOUT,
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn display(&self) -> String {
        std::iter::once(self.program.as_str())
            .chain(self.args.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn drain(mut r: impl Read + Send + 'static) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        buf
    })
}

/// Runs the detector on one image. `image_size` bounds the clamping; when
/// absent it is read from the image header, and boxes are left unclipped if
/// that fails too.
pub fn run_external_detector(
    image_path: &Path,
    cmd: &DetectorCommand,
    frame_id: u64,
    image_size: Option<(u32, u32)>,
) -> std::result::Result<FrameDetections, DetectorError> {
    let mut child = Command::new(&cmd.program)
        .args(&cmd.args)
        .arg(image_path)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| DetectorError::Spawn {
            frame_id,
            command: cmd.display(),
            source,
        })?;
    let stdout = drain(child.stdout.take().expect("stdout is piped"));
    let stderr = drain(child.stderr.take().expect("stderr is piped"));

    let status = match child.wait_timeout(cmd.timeout) {
        Ok(Some(status)) => status,
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(DetectorError::Timeout {
                frame_id,
                seconds: cmd.timeout.as_secs_f64(),
            });
        }
        Err(e) => {
            return Err(DetectorError::Failed {
                frame_id,
                status: "unknown status".into(),
                stderr: e.to_string(),
            })
        }
    };
    let out = stdout.join().unwrap_or_default();
    let err = stderr.join().unwrap_or_default();
    if !status.success() {
        return Err(DetectorError::Failed {
            frame_id,
            status: status.to_string(),
            stderr: String::from_utf8_lossy(&err).trim().to_string(),
        });
    }

    let malformed = |reason: String| DetectorError::MalformedOutput { frame_id, reason };
    let mut record: FrameRecord = serde_json::from_slice(&out).map_err(|e| malformed(e.to_string()))?;
    record.frame_id = frame_id;
    let size = image_size.or_else(|| image::image_dimensions(image_path).ok());
    let validated = match size {
        Some((w, h)) => validate_frame(&record, w, h),
        None => validate_unbounded(&record),
    }
    .map_err(|e| malformed(e.to_string()))?;
    Ok(validated.frame)
}
