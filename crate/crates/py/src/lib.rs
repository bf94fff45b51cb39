//! Python bindings for the `chromalayer` annotation pipeline.

use std::path::PathBuf;

use chromalayer::annotate::{annotate_scene, MaskThreshold};
use chromalayer::codec;
use chromalayer::compositor;
use chromalayer::config::Config;
use chromalayer::dataset;
use chromalayer::derive::{self, DerivationConfig};
use chromalayer::layers;
use chromalayer::model::{self, ElementId};
use chromalayer::raster::{Bgr, Bgra};
use chromalayer::synth::{self, SynthParams};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

create_exception!(chromalayer_py, ChromaLayerError, PyException);

fn err(e: chromalayer::error::Error) -> PyErr {
    ChromaLayerError::new_err(e.to_string())
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| PyValueError::new_err(format!("{what}: {e}")))
}

fn bgr((b, g, r): (f64, f64, f64)) -> Bgr {
    Bgr::new(b, g, r)
}

fn bgra_tuple(p: Bgra) -> (f64, f64, f64, f64) {
    (p.b, p.g, p.r, p.a)
}

/// A page canvas with its elements and their BGRA bitmaps.
#[pyclass(module = "chromalayer_py", from_py_object)]
#[derive(Clone)]
struct Scene {
    inner: model::Scene,
}

#[pymethods]
impl Scene {
    #[getter]
    fn canvas(&self) -> (u32, u32) {
        self.inner.canvas
    }

    #[getter]
    fn page_background(&self) -> (f64, f64, f64) {
        let c = self.inner.page_background;
        (c.b, c.g, c.r)
    }

    #[getter]
    fn element_ids(&self) -> Vec<u32> {
        self.inner.ids().map(|id| id.0).collect()
    }

    /// Element metadata as a dict: xpath, kind, z_index, rect, doc_order, anchor, size.
    fn element<'py>(&self, py: Python<'py>, element_id: u32) -> PyResult<Bound<'py, PyDict>> {
        let el = self.inner.element(ElementId(element_id)).ok_or_else(|| err(chromalayer::error::Error::UnknownElement(ElementId(element_id))))?;
        let d = PyDict::new(py);
        d.set_item("xpath", &el.meta.xpath)?;
        d.set_item("kind", format!("{:?}", el.meta.kind).to_lowercase())?;
        d.set_item("z_index", el.meta.z_index.numeric())?;
        let r = el.meta.rect;
        d.set_item("rect", (r.x, r.y, r.w, r.h))?;
        d.set_item("doc_order", el.meta.doc_order)?;
        d.set_item("anchor", el.bitmap.anchor)?;
        d.set_item("size", el.bitmap.bgra.dimensions())?;
        Ok(d)
    }

    /// Pixel `(x, y)` of an element bitmap, in bitmap coordinates, as `(b, g, r, a)`.
    fn pixel(&self, element_id: u32, x: u32, y: u32) -> PyResult<(f64, f64, f64, f64)> {
        let el = self.inner.element(ElementId(element_id)).ok_or_else(|| err(chromalayer::error::Error::UnknownElement(ElementId(element_id))))?;
        let (w, h) = el.bitmap.bgra.dimensions();
        if x >= w || y >= h {
            return Err(PyValueError::new_err(format!("({x},{y}) outside {w}x{h} bitmap")));
        }
        Ok(bgra_tuple(el.bitmap.bgra.get(x, y)))
    }

    /// Rule violations; empty when the scene is well formed.
    fn validate(&self) -> Vec<String> {
        model::validate_scene(&self.inner).findings.iter().map(ToString::to_string).collect()
    }

    /// Composites the scene in `layering` order and returns an 8-bit RGB PNG.
    #[pyo3(signature = (layering, background=None))]
    fn render_png<'py>(&self, py: Python<'py>, layering: &Layering, background: Option<(f64, f64, f64)>) -> PyResult<Bound<'py, PyBytes>> {
        let img = compositor::render_scene(&self.inner, &layering.inner, background.map(bgr)).map_err(err)?;
        Ok(PyBytes::new(py, &codec::encode_bgr(&img)))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Scene> {
        let inner = serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Scene { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.elements.len()
    }

    fn __repr__(&self) -> String {
        let (w, h) = self.inner.canvas;
        format!("Scene({w}x{h}, {} elements)", self.inner.elements.len())
    }
}

/// Elements grouped into layers, bottom first.
#[pyclass(module = "chromalayer_py", from_py_object)]
#[derive(Clone)]
struct Layering {
    inner: layers::Layering,
}

#[pymethods]
impl Layering {
    #[new]
    fn new(layers: Vec<Vec<u32>>) -> Self {
        let layers = layers.into_iter().map(|l| l.into_iter().map(ElementId).collect()).collect();
        Layering { inner: layers::Layering::new(layers) }
    }

    #[getter]
    fn layers(&self) -> Vec<Vec<u32>> {
        self.inner.layers().iter().map(|l| l.iter().map(|id| id.0).collect()).collect()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    fn __repr__(&self) -> String {
        format!("Layering(k={})", self.inner.k())
    }
}

/// Generates a seeded synthetic scene; returns `(scene, true_layering, paint_order)`.
#[pyfunction]
#[pyo3(signature = (seed, canvas=None, element_count=None, layout=None, alpha=None, text_fraction=None))]
fn synth_scene(
    seed: u64,
    canvas: Option<(u32, u32)>,
    element_count: Option<(usize, usize)>,
    layout: Option<&str>,
    alpha: Option<&str>,
    text_fraction: Option<f64>,
) -> PyResult<(Scene, Layering, Vec<u32>)> {
    let mut p = SynthParams { seed, ..Default::default() };
    if let Some(c) = canvas {
        p.canvas = c;
    }
    if let Some(n) = element_count {
        p.element_count = n;
    }
    if let Some(l) = layout {
        p.layout = parse("layout", l)?;
    }
    if let Some(a) = alpha {
        p.alpha_mode = parse("alpha", a)?;
    }
    if let Some(t) = text_fraction {
        p.text_fraction = t;
    }
    let s = synth::synth_scene(&p).map_err(err)?;
    Ok((Scene { inner: s.scene }, Layering { inner: s.layering }, s.paint_order.iter().map(|id| id.0).collect()))
}

/// Straight-alpha source-over of `fg = (b, g, r, a)` on `bg = (b, g, r)`.
#[pyfunction]
fn composite_over(fg: (f64, f64, f64, f64), bg: (f64, f64, f64)) -> (f64, f64, f64) {
    let c = compositor::composite_over(Bgra::new(fg.0, fg.1, fg.2, fg.3), bgr(bg));
    (c.b, c.g, c.r)
}

/// Recovers one graphic pixel from its appearance over pure blue, green and red.
#[pyfunction]
fn derive_graphic_pixel(blue: (f64, f64, f64), green: (f64, f64, f64), red: (f64, f64, f64)) -> (f64, f64, f64, f64) {
    bgra_tuple(derive::derive_graphic_pixel(bgr(blue), bgr(green), bgr(red), &DerivationConfig::default()))
}

/// Recovers one text pixel from the raw capture, the backdrop and the three recolored captures.
#[pyfunction]
#[pyo3(signature = (raw, backdrop, blue, green, red, white=None))]
fn derive_text_pixel(
    raw: (f64, f64, f64),
    backdrop: (f64, f64, f64),
    blue: (f64, f64, f64),
    green: (f64, f64, f64),
    red: (f64, f64, f64),
    white: Option<bool>,
) -> (f64, f64, f64, f64) {
    let backdrop = bgr(backdrop);
    let white = white.unwrap_or(backdrop.b >= 255.0 && backdrop.g >= 255.0 && backdrop.r >= 255.0);
    bgra_tuple(derive::derive_text_pixel(bgr(raw), backdrop, bgr(blue), bgr(green), bgr(red), white, &DerivationConfig::default()))
}

/// Builds the stacking graph (with cycles repaired) and returns the minimum layering.
#[pyfunction]
fn recover_layering(scene: &Scene) -> PyResult<Layering> {
    let mut graph = layers::build_stack_graph(&scene.inner);
    graph.break_cycles();
    Ok(Layering { inner: layers::assign_layers(&graph).map_err(err)? })
}

/// Layering violations against the scene's stacking graph; empty when valid.
#[pyfunction]
fn validate_layering(scene: &Scene, layering: &Layering) -> Vec<String> {
    let mut graph = layers::build_stack_graph(&scene.inner);
    graph.break_cycles();
    layers::validate_layering(&scene.inner, &graph, &layering.inner).findings.iter().map(ToString::to_string).collect()
}

/// Per-element masks, contours and bounding boxes.
///
/// Returns a list of dicts with `element_id`, `visible`, `bbox` (`[x, y, w, h]`
/// or `None`), `contours` (lists of `(x, y)`), `area` and `mask_png`.
#[pyfunction]
#[pyo3(signature = (scene, layering, threshold="float"))]
fn annotate<'py>(py: Python<'py>, scene: &Scene, layering: &Layering, threshold: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let threshold: MaskThreshold = parse("threshold", threshold)?;
    let set = annotate_scene(&scene.inner, &layering.inner, threshold).map_err(err)?;
    set.elements
        .iter()
        .map(|a| {
            let d = PyDict::new(py);
            d.set_item("element_id", a.element_id().0)?;
            d.set_item("visible", a.visible())?;
            d.set_item("bbox", a.bbox.xywh().map(|b| b.to_vec()))?;
            d.set_item("contours", a.contours.iter().map(|c| c.points.clone()).collect::<Vec<_>>())?;
            d.set_item("area", a.mask.bits.count())?;
            d.set_item("mask_png", PyBytes::new(py, &codec::encode_mask(&a.mask.bits)))?;
            Ok(d)
        })
        .collect()
}

fn load_config(path: Option<PathBuf>) -> PyResult<Config> {
    Config::load(path.as_deref()).map_err(err)
}

/// Writes a synthetic sample (captures plus ground truth) to `dir`.
#[pyfunction]
#[pyo3(signature = (dir, seed, config=None))]
fn synth_sample(dir: PathBuf, seed: u64, config: Option<PathBuf>) -> PyResult<()> {
    let cfg = load_config(config)?;
    dataset::synth_sample(&dir, &SynthParams { seed, ..Default::default() }, &cfg).map_err(err)?;
    Ok(())
}

/// Runs derive, layerize and export on a sample directory holding captures.
#[pyfunction]
#[pyo3(signature = (dir, config=None))]
fn process_sample(dir: PathBuf, config: Option<PathBuf>) -> PyResult<()> {
    let cfg = load_config(config)?;
    dataset::derive_stage(&dir, &cfg.derivation).map_err(err)?;
    dataset::layerize_stage(&dir).map_err(err)?;
    dataset::export_stage(&dir, &dataset::sample_info(&dir, &cfg.hash())).map_err(err)?;
    Ok(())
}

/// Reads a sample back as `(scene, layering)`.
#[pyfunction]
fn read_sample(dir: PathBuf) -> PyResult<(Scene, Layering)> {
    let s = dataset::read_sample(&dir).map_err(err)?;
    Ok((Scene { inner: s.scene }, Layering { inner: s.layering }))
}

/// Writes `scene` and `layering` with annotations to `dir`.
#[pyfunction]
#[pyo3(signature = (dir, scene, layering, source="python"))]
fn write_sample(dir: PathBuf, scene: &Scene, layering: &Layering, source: &str) -> PyResult<()> {
    let hash = Config::default().hash();
    let info = dataset::SampleInfo { sample_id: dataset::sample_dir_name(0, source), source: source.to_string(), config_hash: hash };
    let annotations = annotate_scene(&scene.inner, &layering.inner, MaskThreshold::Float).map_err(err)?;
    dataset::write_sample(&dir, &info, &scene.inner, &layering.inner, &annotations, None).map_err(err)?;
    Ok(())
}

/// Every invariant violation found in the sample; empty when it verifies.
#[pyfunction]
fn verify_sample(dir: PathBuf) -> PyResult<Vec<String>> {
    let report = dataset::verify_sample(&dir, None).map_err(err)?;
    Ok(report.findings.iter().map(ToString::to_string).collect())
}

#[pymodule]
fn chromalayer_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ChromaLayerError", m.py().get_type::<ChromaLayerError>())?;
    m.add_class::<Scene>()?;
    m.add_class::<Layering>()?;
    m.add_function(wrap_pyfunction!(synth_scene, m)?)?;
    m.add_function(wrap_pyfunction!(composite_over, m)?)?;
    m.add_function(wrap_pyfunction!(derive_graphic_pixel, m)?)?;
    m.add_function(wrap_pyfunction!(derive_text_pixel, m)?)?;
    m.add_function(wrap_pyfunction!(recover_layering, m)?)?;
    m.add_function(wrap_pyfunction!(validate_layering, m)?)?;
    m.add_function(wrap_pyfunction!(annotate, m)?)?;
    m.add_function(wrap_pyfunction!(synth_sample, m)?)?;
    m.add_function(wrap_pyfunction!(process_sample, m)?)?;
    m.add_function(wrap_pyfunction!(read_sample, m)?)?;
    m.add_function(wrap_pyfunction!(write_sample, m)?)?;
    m.add_function(wrap_pyfunction!(verify_sample, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
