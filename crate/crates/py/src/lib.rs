//! Python bindings. Arrays cross the boundary as nested lists; reports come
//! back as plain dicts.

use std::collections::HashMap;
use std::path::PathBuf;

use mvs_core::depth as cd;
use mvs_core::fusion as cf;
use mvs_core::geometry as cg;
use mvs_core::pipeline as cp;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError};
use pyo3::prelude::*;

create_exception!(mvskit, MvsError, PyException, "Raised for any pipeline failure.");
create_exception!(
    mvskit,
    FormatError,
    MvsError,
    "A file did not match its expected layout."
);
create_exception!(
    mvskit,
    ConfigError,
    MvsError,
    "Inconsistent configuration or arguments."
);

fn err(e: mvs_core::MvsError) -> PyErr {
    let msg = e.to_string();
    match e {
        mvs_core::MvsError::Io { .. } => PyOSError::new_err(msg),
        mvs_core::MvsError::Format { .. } => FormatError::new_err(msg),
        mvs_core::MvsError::Config(_) | mvs_core::MvsError::Argument(_) => ConfigError::new_err(msg),
        _ => MvsError::new_err(msg),
    }
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn pose_from_rows(rows: &[Vec<f64>]) -> PyResult<cg::RigidPose> {
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if rows.len() != 4 || flat.len() != 16 {
        return Err(ConfigError::new_err("pose must be a 4x4 nested list"));
    }
    cg::RigidPose::from_row_major(&flat, cp::MANIFEST_POSE_TOLERANCE).map_err(err)
}

fn rows_of(pose: &cg::RigidPose) -> Vec<Vec<f64>> {
    pose.to_row_major().chunks(4).map(<[f64]>::to_vec).collect()
}

/// Per-pixel depth with a validity mask.
#[pyclass(name = "DepthMap", module = "mvskit", skip_from_py_object)]
#[derive(Clone)]
pub struct PyDepthMap {
    inner: cd::DepthMap,
}

#[pymethods]
impl PyDepthMap {
    /// Builds a map from row-major values; non-positive or non-finite
    /// entries and `None` become invalid pixels.
    #[new]
    fn new(width: usize, height: usize, values: Vec<Option<f64>>) -> PyResult<Self> {
        let raw = values.into_iter().map(|v| v.unwrap_or(0.0)).collect();
        Ok(PyDepthMap {
            inner: cd::DepthMap::from_values(width, height, raw).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDepthMap {
            inner: cd::load_depth_map(path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        cd::save_depth_map(&self.inner, path).map_err(err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height
    }

    fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.inner.get(x, y)
    }

    fn valid_count(&self) -> usize {
        self.inner.valid_count()
    }

    fn valid_range(&self) -> Option<(f64, f64)> {
        self.inner.valid_range()
    }

    /// Rows of depths, `None` where invalid.
    fn to_list(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.inner.height)
            .map(|y| (0..self.inner.width).map(|x| self.inner.get(x, y)).collect())
            .collect()
    }

    fn to_bytes(&self) -> Vec<u8> {
        cd::encode_depth_map(&self.inner)
    }

    #[staticmethod]
    fn from_bytes(data: Vec<u8>) -> PyResult<Self> {
        Ok(PyDepthMap {
            inner: cd::decode_depth_map(&data).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "DepthMap({}x{}, {} valid)",
            self.inner.width,
            self.inner.height,
            self.inner.valid_count()
        )
    }
}

/// A posed image, optionally with ground-truth depth.
#[pyclass(name = "Frame", module = "mvskit", skip_from_py_object)]
#[derive(Clone)]
pub struct PyFrame {
    inner: cg::CameraFrame,
}

#[pymethods]
impl PyFrame {
    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.intrinsics.width
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.intrinsics.height
    }

    /// `(fx, fy, cx, cy)`.
    #[getter]
    fn intrinsics(&self) -> (f64, f64, f64, f64) {
        let k = &self.inner.intrinsics;
        (k.fx, k.fy, k.cx, k.cy)
    }

    /// World-from-camera 4x4 matrix.
    #[getter]
    fn pose(&self) -> Vec<Vec<f64>> {
        rows_of(self.inner.world_from_camera())
    }

    #[setter]
    fn set_pose(&mut self, rows: Vec<Vec<f64>>) -> PyResult<()> {
        self.inner.set_world_from_camera(pose_from_rows(&rows)?);
        Ok(())
    }

    #[getter]
    fn gt_depth(&self) -> Option<PyDepthMap> {
        self.inner.gt_depth.clone().map(|inner| PyDepthMap { inner })
    }

    /// Grayscale pixels as rows.
    fn gray(&self) -> Vec<Vec<f32>> {
        let g = self.inner.image.to_gray();
        g.chunks(self.inner.image.width).map(<[f32]>::to_vec).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Frame({:?}, {}x{})",
            self.inner.id, self.inner.intrinsics.width, self.inner.intrinsics.height
        )
    }
}

/// Indexed triangle mesh.
#[pyclass(name = "TriangleMesh", module = "mvskit", skip_from_py_object)]
#[derive(Clone)]
pub struct PyTriangleMesh {
    inner: cf::TriangleMesh,
}

#[pymethods]
impl PyTriangleMesh {
    #[new]
    fn new(vertices: Vec<[f32; 3]>, triangles: Vec<[u32; 3]>) -> PyResult<Self> {
        let inner = cf::TriangleMesh { vertices, triangles };
        inner.validate().map_err(err)?;
        Ok(PyTriangleMesh { inner })
    }

    #[staticmethod]
    fn load_ply(path: PathBuf) -> PyResult<Self> {
        Ok(PyTriangleMesh {
            inner: cf::load_ply(&path).map_err(err)?,
        })
    }

    #[pyo3(signature = (path, ascii = false))]
    fn save_ply(&self, path: PathBuf, ascii: bool) -> PyResult<()> {
        let format = if ascii {
            cf::PlyFormat::Ascii
        } else {
            cf::PlyFormat::BinaryLittleEndian
        };
        cf::save_ply(&self.inner, &path, format).map_err(err)
    }

    #[getter]
    fn vertices(&self) -> Vec<[f32; 3]> {
        self.inner.vertices.clone()
    }

    #[getter]
    fn triangles(&self) -> Vec<[u32; 3]> {
        self.inner.triangles.clone()
    }

    fn surface_area(&self) -> f64 {
        self.inner.surface_area()
    }

    #[pyo3(signature = (n, seed = 0))]
    fn sample_points(&self, n: usize, seed: u64) -> PyResult<Vec<[f64; 3]>> {
        cf::sample_surface_points(&self.inner, n, seed).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "TriangleMesh({} vertices, {} triangles)",
            self.inner.vertices.len(),
            self.inner.triangles.len()
        )
    }
}

fn frames_of(frames: &[PyRef<'_, PyFrame>]) -> Vec<cg::CameraFrame> {
    frames.iter().map(|f| f.inner.clone()).collect()
}

fn wrap_frames(frames: Vec<cg::CameraFrame>) -> Vec<PyFrame> {
    frames.into_iter().map(|inner| PyFrame { inner }).collect()
}

/// Renders `kind` ("plane", "sphere" or "two-planes") from `n_frames` cameras.
#[pyfunction]
#[pyo3(signature = (kind, n_frames, seed = 0, width = None, height = None))]
fn synth_scene(
    kind: &str,
    n_frames: usize,
    seed: u64,
    width: Option<usize>,
    height: Option<usize>,
) -> PyResult<Vec<PyFrame>> {
    let kind: cp::SynthKind = kind.parse().map_err(err)?;
    let mut cfg = cp::SynthConfig::default();
    if let Some(w) = width {
        cfg.width = w;
    }
    if let Some(h) = height {
        cfg.height = h;
    }
    Ok(wrap_frames(
        cp::synth_scene(kind, n_frames, seed, &cfg).map_err(err)?,
    ))
}

#[pyfunction]
fn load_scene(path: PathBuf) -> PyResult<Vec<PyFrame>> {
    Ok(wrap_frames(cp::load_scene(&path).map_err(err)?.frames))
}

/// Writes images, ground truth and `scene.json` under `dir`.
#[pyfunction]
#[pyo3(signature = (frames, dir, units = "scene units"))]
fn write_scene(frames: Vec<PyRef<'_, PyFrame>>, dir: PathBuf, units: &str) -> PyResult<PathBuf> {
    cp::write_scene(&frames_of(&frames), &dir, units).map_err(err)?;
    Ok(dir.join("scene.json"))
}

/// Pose distance between two world-from-camera matrices.
#[pyfunction]
fn pose_distance(reference: Vec<Vec<f64>>, source: Vec<Vec<f64>>) -> PyResult<f64> {
    let rel = cg::relative_pose(&pose_from_rows(&reference)?, &pose_from_rows(&source)?);
    Ok(cg::pose_distance(&rel))
}

/// `(d_min, d_max)` a reference can match against its sources.
#[pyfunction]
fn matchable_range(reference: PyRef<'_, PyFrame>, sources: Vec<PyRef<'_, PyFrame>>) -> PyResult<(f64, f64)> {
    let src: Vec<&cg::CameraFrame> = sources.iter().map(|s| &s.inner).collect();
    let r = cg::estimate_matchable_range(&reference.inner, &src, &cg::RangeHeuristicConfig::default())
        .map_err(err)?;
    Ok((r.d_min, r.d_max))
}

/// Softmax-weighted score over `(score, weight)` pairs.
#[pyfunction]
fn aggregate_views(pairs: Vec<(f64, f64)>) -> PyResult<f64> {
    mvs_core::costvolume::aggregate_views(&pairs).map_err(err)
}

#[pyfunction]
fn sigmoid_log_depth(x: f64, d_min: f64, d_max: f64) -> PyResult<f64> {
    let r = cg::RangeEstimate::new(d_min, d_max).map_err(err)?;
    Ok(cd::sigmoid_log_depth(x, &r))
}

/// `[(reference, [sources...]), ...]` chosen by pose distance or overlap.
#[pyfunction]
#[pyo3(signature = (frames, mode = "pose", max_sources = 8))]
fn select_tuples(
    frames: Vec<PyRef<'_, PyFrame>>,
    mode: &str,
    max_sources: usize,
) -> PyResult<Vec<(String, Vec<String>)>> {
    let frames = frames_of(&frames);
    let sel = match mode {
        "pose" => cp::select_tuples_pose(
            &frames,
            &cp::PoseTupleConfig {
                max_sources,
                ..Default::default()
            },
        ),
        "overlap" => cp::select_tuples_overlap(
            &frames,
            &cp::OverlapTupleConfig {
                max_sources,
                ..Default::default()
            },
        ),
        other => return Err(ConfigError::new_err(format!("unknown tuple mode {other:?}"))),
    }
    .map_err(err)?;
    Ok(sel.tuples.into_iter().map(|t| (t.reference, t.sources)).collect())
}

/// Runs the cascade per tuple. Returns `(depths by reference id, report)`;
/// `config` is a pipeline configuration JSON string.
#[pyfunction]
#[pyo3(signature = (frames, tuples, config = None))]
fn run_depth<'py>(
    py: Python<'py>,
    frames: Vec<PyRef<'py, PyFrame>>,
    tuples: Vec<(String, Vec<String>)>,
    config: Option<&str>,
) -> PyResult<(HashMap<String, PyDepthMap>, Bound<'py, PyAny>)> {
    let cfg = match config {
        Some(text) => cp::PipelineConfig::from_json(text).map_err(err)?,
        None => cp::PipelineConfig::default(),
    };
    let frames = frames_of(&frames);
    let specs: Vec<cp::TupleSpec> = tuples
        .into_iter()
        .map(|(reference, sources)| cp::TupleSpec { reference, sources })
        .collect();
    let run = py.detach(|| cp::run_depth(&frames, &specs, &cfg)).map_err(err)?;
    let report = serde_json::to_string(&run.report).expect("report serializes");
    let depths = run
        .results
        .into_iter()
        .map(|r| (r.reference, PyDepthMap { inner: r.depth }))
        .collect();
    Ok((depths, json_to_py(py, &report)?))
}

/// Integrates depth maps (keyed by frame id, fused in frame order) and
/// extracts a mesh.
#[pyfunction]
#[pyo3(signature = (frames, depths, voxel = 0.04, max_depth = 3.5))]
fn fuse(
    py: Python<'_>,
    frames: Vec<PyRef<'_, PyFrame>>,
    depths: HashMap<String, PyRef<'_, PyDepthMap>>,
    voxel: f64,
    max_depth: f64,
) -> PyResult<PyTriangleMesh> {
    let frames = frames_of(&frames);
    let ordered: Vec<(String, cd::DepthMap)> = frames
        .iter()
        .filter_map(|f| depths.get(&f.id).map(|d| (f.id.clone(), d.inner.clone())))
        .collect();
    if ordered.len() != depths.len() {
        return Err(ConfigError::new_err("a depth map key names no frame"));
    }
    let cfg = cf::TsdfConfig {
        voxel_size: voxel,
        max_fuse_depth: max_depth,
        ..Default::default()
    };
    let (inner, _) = py
        .detach(|| cp::fuse_depth_maps(&frames, &ordered, &cfg))
        .map_err(err)?;
    Ok(PyTriangleMesh { inner })
}

/// Mean abs-rel and inlier ratio over jointly valid pixels.
#[pyfunction]
#[pyo3(signature = (pred, gt, thresh = mvs_core::evaluation::DEFAULT_INLIER_THRESHOLD))]
fn depth_metrics<'py>(
    py: Python<'py>,
    pred: PyRef<'py, PyDepthMap>,
    gt: PyRef<'py, PyDepthMap>,
    thresh: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let pairs = [("image".to_string(), pred.inner.clone(), gt.inner.clone())];
    let report = mvs_core::evaluation::depth_report(&pairs, thresh).map_err(err)?;
    json_to_py(py, &report.to_json())
}

/// Vertex-to-vertex distances plus an F-score on area-weighted samples.
#[pyfunction]
#[pyo3(signature = (pred, gt, thresh = 0.05, samples = 200_000, seed = 0, swap_acc_comp = false))]
fn mesh_metrics<'py>(
    py: Python<'py>,
    pred: PyRef<'py, PyTriangleMesh>,
    gt: PyRef<'py, PyTriangleMesh>,
    thresh: f64,
    samples: usize,
    seed: u64,
    swap_acc_comp: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let (p, g) = (&pred.inner, &gt.inner);
    let (mut m, f) = py
        .detach(|| -> mvs_core::Result<_> {
            let m = cf::mesh_distance_metrics(p, g)?;
            let pp = cf::sample_surface_points(p, samples, seed)?;
            let gp = cf::sample_surface_points(g, samples, seed)?;
            Ok((m, cf::fscore_at_threshold(&pp, &gp, thresh)?))
        })
        .map_err(err)?;
    if swap_acc_comp {
        std::mem::swap(&mut m.accuracy, &mut m.completion);
    }
    let doc = serde_json::json!({
        "accuracy": m.accuracy,
        "completion": m.completion,
        "chamfer": m.chamfer,
        "precision": f.precision,
        "recall": f.recall,
        "fscore": f.fscore,
        "threshold": f.threshold,
    });
    json_to_py(py, &doc.to_string())
}

#[pymodule]
fn mvskit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("MvsError", py.get_type::<MvsError>())?;
    m.add("FormatError", py.get_type::<FormatError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add_class::<PyDepthMap>()?;
    m.add_class::<PyFrame>()?;
    m.add_class::<PyTriangleMesh>()?;
    m.add_function(wrap_pyfunction!(synth_scene, m)?)?;
    m.add_function(wrap_pyfunction!(load_scene, m)?)?;
    m.add_function(wrap_pyfunction!(write_scene, m)?)?;
    m.add_function(wrap_pyfunction!(pose_distance, m)?)?;
    m.add_function(wrap_pyfunction!(matchable_range, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_views, m)?)?;
    m.add_function(wrap_pyfunction!(sigmoid_log_depth, m)?)?;
    m.add_function(wrap_pyfunction!(select_tuples, m)?)?;
    m.add_function(wrap_pyfunction!(run_depth, m)?)?;
    m.add_function(wrap_pyfunction!(fuse, m)?)?;
    m.add_function(wrap_pyfunction!(depth_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(mesh_metrics, m)?)?;
    Ok(())
}
