//! Python bindings. Frames are passed as lists of `Detection`; images as
//! `(bytes, width, height)` with interleaved RGB rows.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use wapdet::harness::{self, Metric, ScenarioSpec, ScoredStream, ThetaRange};
use wapdet::{map, temporal, tracker, transforms};

fn to_py(e: wapdet::Error) -> PyErr {
    match e {
        wapdet::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "BBox", frozen, eq, skip_from_py_object)]
#[derive(Clone, Copy, PartialEq)]
struct PyBBox(wapdet::BBox);

#[pymethods]
impl PyBBox {
    #[new]
    fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> PyResult<Self> {
        wapdet::BBox::new(x1, y1, x2, y2).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn from_center_size(cx: f64, cy: f64, w: f64, h: f64) -> PyResult<Self> {
        wapdet::BBox::from_center_size(cx, cy, w, h).map(Self).map_err(to_py)
    }

    #[getter]
    fn x1(&self) -> f64 {
        self.0.x1()
    }
    #[getter]
    fn y1(&self) -> f64 {
        self.0.y1()
    }
    #[getter]
    fn x2(&self) -> f64 {
        self.0.x2()
    }
    #[getter]
    fn y2(&self) -> f64 {
        self.0.y2()
    }

    fn area(&self) -> f64 {
        self.0.area()
    }

    fn iou(&self, other: &PyBBox) -> f64 {
        wapdet::iou(&self.0, &other.0)
    }

    fn to_tuple(&self) -> (f64, f64, f64, f64) {
        let [a, b, c, d] = self.0.to_array();
        (a, b, c, d)
    }

    fn __repr__(&self) -> String {
        let [a, b, c, d] = self.0.to_array();
        format!("BBox({a}, {b}, {c}, {d})")
    }
}

#[pyclass(name = "Detection", frozen, eq, skip_from_py_object)]
#[derive(Clone, Copy, PartialEq)]
struct PyDetection(wapdet::Detection);

#[pymethods]
impl PyDetection {
    #[new]
    fn new(bbox: PyRef<'_, PyBBox>, confidence: f64, class_id: u32) -> PyResult<Self> {
        wapdet::Detection::new(bbox.0, confidence, class_id).map(Self).map_err(to_py)
    }

    #[getter]
    fn bbox(&self) -> PyBBox {
        PyBBox(*self.0.bbox())
    }
    #[getter]
    fn confidence(&self) -> f64 {
        self.0.confidence()
    }
    #[getter]
    fn class_id(&self) -> u32 {
        self.0.class_id()
    }

    fn __repr__(&self) -> String {
        let [a, b, c, d] = self.0.bbox().to_array();
        format!(
            "Detection(BBox({a}, {b}, {c}, {d}), confidence={}, class_id={})",
            self.0.confidence(),
            self.0.class_id()
        )
    }
}

fn frame(frame_id: u64, dets: &[PyRef<'_, PyDetection>]) -> wapdet::FrameDetections {
    wapdet::FrameDetections::new(frame_id, dets.iter().map(|d| d.0).collect())
}

fn detections(f: &wapdet::FrameDetections) -> Vec<PyDetection> {
    f.detections.iter().copied().map(PyDetection).collect()
}

#[pyclass(name = "MetricConfig", get_all, set_all, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyMetricConfig {
    min_overlap: f64,
    a: f64,
    gamma_cs: f64,
    alpha_tp: f64,
    alpha_fp: f64,
    alpha_fn: f64,
}

#[pymethods]
impl PyMetricConfig {
    #[new]
    #[pyo3(signature = (min_overlap=0.5, a=0.5, gamma_cs=0.1, alpha_tp=1.0, alpha_fp=1.0, alpha_fn=1.0))]
    fn new(min_overlap: f64, a: f64, gamma_cs: f64, alpha_tp: f64, alpha_fp: f64, alpha_fn: f64) -> PyResult<Self> {
        let c = Self {
            min_overlap,
            a,
            gamma_cs,
            alpha_tp,
            alpha_fp,
            alpha_fn,
        };
        c.inner().validate().map_err(to_py)?;
        Ok(c)
    }
}

impl PyMetricConfig {
    fn inner(&self) -> wapdet::MetricConfig {
        wapdet::MetricConfig {
            min_overlap: self.min_overlap,
            a: self.a,
            gamma_cs: self.gamma_cs,
            alpha_tp: self.alpha_tp,
            alpha_fp: self.alpha_fp,
            alpha_fn: self.alpha_fn,
        }
    }
}

fn metric_config(cfg: Option<PyRef<'_, PyMetricConfig>>) -> PyResult<wapdet::MetricConfig> {
    let c = cfg.map(|c| c.inner()).unwrap_or_default();
    c.validate().map_err(to_py)?;
    Ok(c)
}

/// Returns `(d_tp, d_fp, d_fn, total)`.
#[pyfunction]
#[pyo3(signature = (gt, pd, config=None))]
fn wap_distance(
    gt: Vec<PyRef<'_, PyDetection>>,
    pd: Vec<PyRef<'_, PyDetection>>,
    config: Option<PyRef<'_, PyMetricConfig>>,
) -> PyResult<(f64, f64, f64, f64)> {
    let d = wapdet::wap_distance(&frame(0, &gt), &frame(0, &pd), &metric_config(config)?);
    Ok((d.d_tp, d.d_fp, d.d_fn, d.total))
}

#[pyfunction]
#[pyo3(signature = (gt, pd, min_overlap=0.5))]
fn map_distance(gt: Vec<PyRef<'_, PyDetection>>, pd: Vec<PyRef<'_, PyDetection>>, min_overlap: f64) -> f64 {
    map::map_distance(&frame(0, &gt), &frame(0, &pd), min_overlap)
}

/// Greedy matching; returns `(tp_pairs, fp_indices, fn_indices)`.
#[pyfunction]
#[pyo3(signature = (gt, pd, config=None))]
fn match_frames(
    gt: Vec<PyRef<'_, PyDetection>>,
    pd: Vec<PyRef<'_, PyDetection>>,
    config: Option<PyRef<'_, PyMetricConfig>>,
) -> PyResult<(Vec<(usize, usize)>, Vec<usize>, Vec<usize>)> {
    let m = wapdet::match_frames(&frame(0, &gt), &frame(0, &pd), &metric_config(config)?);
    Ok((m.tp, m.fp, m.fn_))
}

#[pyfunction]
fn iou(a: PyRef<'_, PyBBox>, b: PyRef<'_, PyBBox>) -> f64 {
    wapdet::iou(&a.0, &b.0)
}

#[pyclass(name = "TemporalDetector")]
struct PyTemporalDetector {
    cfg: temporal::TemporalConfig,
    state: temporal::TemporalState,
}

#[pymethods]
impl PyTemporalDetector {
    #[new]
    #[pyo3(signature = (theta=0.1, window=3))]
    fn new(theta: f64, window: usize) -> PyResult<Self> {
        Ok(Self {
            cfg: temporal::TemporalConfig::new(theta, window).map_err(to_py)?,
            state: temporal::TemporalState::new(),
        })
    }

    fn step(&mut self, distance: f64) -> bool {
        self.state.step(distance, &self.cfg)
    }

    fn reset(&mut self) {
        self.state = temporal::TemporalState::new();
    }

    /// Alarms for a whole sequence, starting from a fresh state.
    fn run(&self, distances: Vec<f64>) -> Vec<bool> {
        temporal::run_sequence(&distances, &self.cfg)
    }
}

#[pyclass(name = "TrackedBox", frozen, get_all)]
struct PyTrackedBox {
    track_id: u64,
    bbox: PyBBox,
    confidence: f64,
    class_id: u32,
}

#[pymethods]
impl PyTrackedBox {
    fn __repr__(&self) -> String {
        format!("TrackedBox(track_id={}, {})", self.track_id, self.bbox.__repr__())
    }
}

#[pyclass(name = "Tracker")]
struct PyTracker {
    inner: tracker::Tracker,
    frame_id: u64,
}

#[pymethods]
impl PyTracker {
    #[new]
    #[pyo3(signature = (reserved_age=3, assoc_min_iou=0.3, process_noise=1.0, measurement_noise=1.0, min_hits=1))]
    fn new(
        reserved_age: u32,
        assoc_min_iou: f64,
        process_noise: f64,
        measurement_noise: f64,
        min_hits: u32,
    ) -> PyResult<Self> {
        let cfg = tracker::TrackerConfig {
            reserved_age,
            assoc_min_iou,
            process_noise,
            measurement_noise,
            min_hits_to_confirm: min_hits,
        };
        Ok(Self {
            inner: tracker::Tracker::new(cfg).map_err(to_py)?,
            frame_id: 0,
        })
    }

    fn step(&mut self, detections: Vec<PyRef<'_, PyDetection>>) -> Vec<PyTrackedBox> {
        let f = frame(self.frame_id, &detections);
        self.frame_id += 1;
        self.inner
            .step(&f)
            .into_iter()
            .map(|b| PyTrackedBox {
                track_id: b.track_id,
                bbox: PyBBox(b.bbox),
                confidence: b.confidence,
                class_id: b.class_id,
            })
            .collect()
    }

    /// Live tracks, confirmed or not.
    fn __len__(&self) -> usize {
        self.inner.tracks().len()
    }
}

fn image(pixels: &[u8], width: u32, height: u32) -> PyResult<wapdet::ImageBuffer> {
    wapdet::ImageBuffer::new(width, height, pixels.to_vec()).map_err(to_py)
}

#[pyfunction]
fn bit_squeeze<'py>(py: Python<'py>, pixels: &[u8], width: u32, height: u32, bits: u8) -> PyResult<Bound<'py, PyBytes>> {
    let out = transforms::bit_squeeze(&image(pixels, width, height)?, bits).map_err(to_py)?;
    Ok(PyBytes::new(py, out.pixels()))
}

#[pyfunction]
fn gaussian_attack<'py>(
    py: Python<'py>,
    pixels: &[u8],
    width: u32,
    height: u32,
    sigma: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyBytes>> {
    let out = transforms::gaussian_attack(&image(pixels, width, height)?, sigma, seed).map_err(to_py)?;
    Ok(PyBytes::new(py, out.pixels()))
}

#[pyfunction]
fn brightness_attack<'py>(py: Python<'py>, pixels: &[u8], width: u32, height: u32, delta: f64) -> PyResult<Bound<'py, PyBytes>> {
    let out = transforms::brightness_attack(&image(pixels, width, height)?, delta);
    Ok(PyBytes::new(py, out.pixels()))
}

#[pyclass(name = "Stream", frozen, get_all)]
struct PyStream {
    stream_id: String,
    original: Vec<Vec<PyDetection>>,
    squeezed: Vec<Vec<PyDetection>>,
    labels: Vec<bool>,
}

/// Synthetic streams for a builtin name (`builtin:default`) or a spec file.
#[pyfunction]
#[pyo3(signature = (scenario="builtin:default", seed=0))]
fn generate_scenario(scenario: &str, seed: u64) -> PyResult<Vec<PyStream>> {
    let spec = ScenarioSpec::resolve(scenario).map_err(to_py)?;
    let suite = harness::generate_suite(&spec, seed).map_err(to_py)?;
    Ok(suite
        .into_iter()
        .map(|s| PyStream {
            original: s.frames.iter().map(|p| detections(&p.original)).collect(),
            squeezed: s.frames.iter().map(|p| detections(&p.squeezed)).collect(),
            stream_id: s.stream_id,
            labels: s.labels,
        })
        .collect())
}

/// Threshold sweep over per-stream distance and label lists. Returns
/// `(theta, tpr, fpr, accuracy)` rows.
#[pyfunction]
#[pyo3(signature = (scores, labels, window=3, thetas=(0.0, 1.0, 0.005)))]
fn sweep(
    scores: Vec<Vec<f64>>,
    labels: Vec<Vec<bool>>,
    window: usize,
    thetas: (f64, f64, f64),
) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    if scores.len() != labels.len() {
        return Err(PyValueError::new_err("scores and labels must list the same streams"));
    }
    let streams: Vec<ScoredStream> = scores
        .into_iter()
        .zip(labels)
        .map(|(scores, labels)| ScoredStream { scores, labels })
        .collect();
    let range = ThetaRange {
        start: thetas.0,
        stop: thetas.1,
        step: thetas.2,
    };
    let points = harness::sweep_thresholds(&streams, window, &range.values()).map_err(to_py)?;
    Ok(points.into_iter().map(|p| (p.theta, p.tpr, p.fpr, p.accuracy)).collect())
}

/// Generate, score and sweep a scenario in one call.
#[pyfunction]
#[pyo3(signature = (scenario="builtin:default", metric="wap", window=3, seed=0, thetas=(0.0, 1.0, 0.005), config=None))]
fn evaluate(
    scenario: &str,
    metric: &str,
    window: usize,
    seed: u64,
    thetas: (f64, f64, f64),
    config: Option<PyRef<'_, PyMetricConfig>>,
) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let metric: Metric = metric.parse().map_err(to_py)?;
    let cfg = metric_config(config)?;
    let spec = ScenarioSpec::resolve(scenario).map_err(to_py)?;
    let suite = harness::generate_suite(&spec, seed).map_err(to_py)?;
    let scored = harness::score_suite(&suite, metric, &cfg);
    let range = ThetaRange {
        start: thetas.0,
        stop: thetas.1,
        step: thetas.2,
    };
    let points = harness::sweep_thresholds(&scored, window, &range.values()).map_err(to_py)?;
    Ok(points.into_iter().map(|p| (p.theta, p.tpr, p.fpr, p.accuracy)).collect())
}

/// Parses a detection-exchange JSON document (one frame or an array).
#[pyfunction]
fn read_sequence(path: &str) -> PyResult<Vec<(u64, Vec<PyDetection>)>> {
    let frames = wapdet::model::read_sequence(path).map_err(to_py)?;
    Ok(frames.iter().map(|f| (f.frame_id, detections(f))).collect())
}

#[pymodule]
fn wapdet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBBox>()?;
    m.add_class::<PyDetection>()?;
    m.add_class::<PyMetricConfig>()?;
    m.add_class::<PyTemporalDetector>()?;
    m.add_class::<PyTracker>()?;
    m.add_class::<PyTrackedBox>()?;
    m.add_class::<PyStream>()?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(match_frames, m)?)?;
    m.add_function(wrap_pyfunction!(wap_distance, m)?)?;
    m.add_function(wrap_pyfunction!(map_distance, m)?)?;
    m.add_function(wrap_pyfunction!(bit_squeeze, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_attack, m)?)?;
    m.add_function(wrap_pyfunction!(brightness_attack, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(read_sequence, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
