//! On-disk sample layout and the pipeline stages that fill it.
//!
//! A sample directory is populated stage by stage:
//!
//! | stage    | files                                                        |
//! |----------|--------------------------------------------------------------|
//! | capture  | `capture.json`, `screenshot.png`, `groups/NNN/*.png`         |
//! | derive   | `meta.json`, `styles.json`, `elements/NNN.png`               |
//! | layerize | `layers.json`                                                |
//! | export   | `masks/NNN.png`, `contours.json`, `bboxes.json`, `manifest.json` |
//!
//! `NNN` is the zero-padded element id. Rasters are 8-bit PNG in RGB(A)
//! channel order with straight alpha; masks are 1-bit. Every JSON document
//! carries `schema_version`. Writing the same inputs twice gives identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotate::{annotate_scene, bbox_is_tight, check_contour, AnnotationSet, BBox, Contour, ElementAnnotation, Mask, MaskThreshold};
use crate::capture::sim::SimulatedPage;
use crate::capture::{capture_page, CaptureConfig, CaptureGroup, CapturedPage, PageOutcome};
use crate::codec;
use crate::config::Config;
use crate::compositor::render_scene;
use crate::derive::{derive_graphic, derive_text, DerivationConfig, GraphicGroup, TextGroup};
use crate::error::{Error, Result};
use crate::layers::{assign_layers, build_stack_graph, validate_layering, Layering};
use crate::model::{validate_scene, ElementBitmap, ElementId, ElementMeta, NodeKind, Scene, SceneElement, SceneSource, ValidationReport, ZIndex};
use crate::raster::{Bgr, BgrRaster, Rect};
use crate::synth::{synth_scene, SynthParams};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const CAPTURE: &str = "capture.json";
pub const SCREENSHOT: &str = "screenshot.png";
pub const META: &str = "meta.json";
pub const STYLES: &str = "styles.json";
pub const LAYERS: &str = "layers.json";
pub const CONTOURS: &str = "contours.json";
pub const BBOXES: &str = "bboxes.json";
pub const MANIFEST: &str = "manifest.json";

const GRAPHIC_SHOTS: [&str; 3] = ["blue_bg", "green_bg", "red_bg"];
const TEXT_SHOTS: [&str; 5] = ["raw", "no_fg", "blue_fg", "green_fg", "red_fg"];

pub fn element_file(id: ElementId) -> String {
    format!("elements/{:03}.png", id.0)
}

pub fn mask_file(id: ElementId) -> String {
    format!("masks/{:03}.png", id.0)
}

fn group_dir(id: ElementId) -> String {
    format!("groups/{:03}", id.0)
}

/// `<index>-<first 8 hex digits of sha256(source)>`.
pub fn sample_dir_name(index: usize, source: &str) -> String {
    let digest = Sha256::digest(source.as_bytes());
    let hex: String = digest.iter().take(4).map(|b| format!("{b:02x}")).collect();
    format!("{index:05}-{hex}")
}

// ---------------------------------------------------------------- file helpers

fn write_bytes(dir: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

fn write_json<T: Serialize>(dir: &Path, rel: &str, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("documents serialize");
    bytes.push(b'\n');
    write_bytes(dir, rel, &bytes)
}

fn read_bytes(dir: &Path, rel: &str) -> Result<Vec<u8>> {
    let path = dir.join(rel);
    std::fs::read(&path).map_err(|e| Error::io(&path, e))
}

#[derive(Deserialize)]
struct Versioned {
    schema_version: u32,
}

fn read_json<T: DeserializeOwned>(dir: &Path, rel: &str) -> Result<T> {
    let path = dir.join(rel);
    let bytes = read_bytes(dir, rel)?;
    let v: Versioned = serde_json::from_slice(&bytes).map_err(|e| Error::corrupt(&path, e))?;
    if v.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion { path, found: v.schema_version, expected: SCHEMA_VERSION });
    }
    serde_json::from_slice(&bytes).map_err(|e| Error::corrupt(&path, e))
}

fn read_png<T>(dir: &Path, rel: &str, decode: impl Fn(&[u8]) -> std::result::Result<T, String>) -> Result<T> {
    let bytes = read_bytes(dir, rel)?;
    decode(&bytes).map_err(|e| Error::corrupt(dir.join(rel), e))
}

fn remove(dir: &Path, names: &[&str]) -> Result<()> {
    for name in names {
        let path = dir.join(name);
        let res = if path.is_dir() { std::fs::remove_dir_all(&path) } else { std::fs::remove_file(&path) };
        match res {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(Error::io(&path, e)),
        }
    }
    Ok(())
}

const DERIVE_OUTPUTS: [&str; 3] = [META, STYLES, "elements"];
const LAYERIZE_OUTPUTS: [&str; 1] = [LAYERS];
const EXPORT_OUTPUTS: [&str; 4] = ["masks", CONTOURS, BBOXES, MANIFEST];

// ------------------------------------------------------------------ documents

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureEntry {
    pub meta: ElementMeta,
    pub kind: NodeKind,
    pub roi: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureDoc {
    pub schema_version: u32,
    pub source: String,
    pub origin: SceneSource,
    pub viewport: (u32, u32),
    pub page_background: Bgr,
    pub elements: Vec<CaptureEntry>,
    pub discarded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaEntry {
    pub element_id: ElementId,
    pub xpath: String,
    pub z_index: ZIndex,
    pub rect: Rect,
    pub kind: NodeKind,
    pub doc_order: u32,
    pub class: String,
    pub bitmap: String,
    pub anchor: (i32, i32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaDoc {
    pub schema_version: u32,
    pub canvas: (u32, u32),
    pub page_background: Bgr,
    pub source: SceneSource,
    pub elements: Vec<MetaEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleEntry {
    pub element_id: ElementId,
    pub computed_style: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylesDoc {
    pub schema_version: u32,
    pub elements: Vec<StyleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayersDoc {
    pub schema_version: u32,
    pub k: usize,
    /// Bottom layer first.
    pub layers: Vec<Vec<ElementId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourEntry {
    pub element_id: ElementId,
    pub contours: Vec<Contour>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContoursDoc {
    pub schema_version: u32,
    pub elements: Vec<ContourEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub element_id: ElementId,
    pub category_id: u64,
    /// `[x, y, w, h]`, top-left origin. Signed so malformed files parse and fail validation.
    pub bbox: [i64; 4],
    pub area: i64,
    pub iscrowd: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
}

/// COCO-style detection annotations; invisible elements are omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BBoxesDoc {
    pub schema_version: u32,
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    pub categories: Vec<CocoCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub element_id: ElementId,
    pub xpath: String,
    pub kind: NodeKind,
    pub class: String,
    /// 1-based layer index.
    pub layer: usize,
    pub bbox: Option<[i64; 4]>,
    pub visible: bool,
    pub bitmap: String,
    pub mask: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub sample_id: String,
    pub source: String,
    pub viewport: (u32, u32),
    pub tool_version: String,
    pub config_hash: String,
    pub files: Vec<String>,
    pub elements: Vec<ManifestEntry>,
}

impl Manifest {
    /// Every file the manifest references, relative to the sample directory.
    pub fn referenced_files(&self) -> Vec<String> {
        let mut files = self.files.clone();
        for e in &self.elements {
            files.push(e.bitmap.clone());
            files.push(e.mask.clone());
        }
        files
    }
}

/// Identifies a sample when it is written.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleInfo {
    pub sample_id: String,
    pub source: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub manifest: Manifest,
    pub scene: Scene,
    pub layering: Layering,
    pub annotations: AnnotationSet,
}

// -------------------------------------------------------------------- capture

pub fn write_capture(dir: &Path, page: &CapturedPage, origin: SceneSource) -> Result<()> {
    remove(dir, &[CAPTURE, SCREENSHOT, "groups"])?;
    write_bytes(dir, SCREENSHOT, &codec::encode_bgr(&page.screenshot))?;
    let mut elements = Vec::new();
    for (meta, group) in &page.elements {
        let gdir = group_dir(meta.element_id);
        let (kind, shots): (NodeKind, Vec<&BgrRaster>) = match group {
            CaptureGroup::Graphic(g) => (NodeKind::Graphic, vec![&g.blue_bg, &g.green_bg, &g.red_bg]),
            CaptureGroup::Text(t) => (NodeKind::Text, vec![&t.raw, &t.no_fg, &t.blue_fg, &t.green_fg, &t.red_fg]),
        };
        let names: &[&str] = if kind == NodeKind::Graphic { &GRAPHIC_SHOTS } else { &TEXT_SHOTS };
        for (name, shot) in names.iter().zip(shots) {
            write_bytes(dir, &format!("{gdir}/{name}.png"), &codec::encode_bgr(shot))?;
        }
        elements.push(CaptureEntry { meta: meta.clone(), kind, roi: group.roi() });
    }
    let doc = CaptureDoc {
        schema_version: SCHEMA_VERSION,
        source: page.url.clone(),
        origin,
        viewport: page.viewport,
        page_background: page.page_background,
        elements,
        discarded: page.discarded.clone(),
    };
    write_json(dir, CAPTURE, &doc)
}

pub fn read_capture(dir: &Path) -> Result<(CaptureDoc, CapturedPage)> {
    let doc: CaptureDoc = read_json(dir, CAPTURE)?;
    let screenshot = read_png(dir, SCREENSHOT, codec::decode_bgr)?;
    let mut elements = Vec::new();
    for e in &doc.elements {
        let id = e.meta.element_id;
        let gdir = group_dir(id);
        let shot = |name: &str| -> Result<BgrRaster> {
            let rel = format!("{gdir}/{name}.png");
            let img = read_png(dir, &rel, codec::decode_bgr)?;
            if img.dimensions() != (e.roi.w, e.roi.h) {
                return Err(Error::corrupt(dir.join(&rel), format!("size {:?} does not match roi {:?}", img.dimensions(), e.roi)));
            }
            Ok(img)
        };
        let group = match e.kind {
            NodeKind::Graphic => CaptureGroup::Graphic(GraphicGroup {
                element_id: id,
                blue_bg: shot("blue_bg")?,
                green_bg: shot("green_bg")?,
                red_bg: shot("red_bg")?,
                roi: e.roi,
            }),
            NodeKind::Text => CaptureGroup::Text(TextGroup {
                element_id: id,
                raw: shot("raw")?,
                no_fg: shot("no_fg")?,
                blue_fg: shot("blue_fg")?,
                green_fg: shot("green_fg")?,
                red_fg: shot("red_fg")?,
                roi: e.roi,
            }),
        };
        elements.push((e.meta.clone(), group));
    }
    let page = CapturedPage {
        url: doc.source.clone(),
        viewport: doc.viewport,
        page_background: doc.page_background,
        screenshot,
        elements,
        discarded: doc.discarded.clone(),
    };
    Ok((doc, page))
}

// --------------------------------------------------------------------- scene

/// Writes `meta.json`, `styles.json` and `elements/`.
pub fn write_scene(dir: &Path, scene: &Scene) -> Result<()> {
    remove(dir, &DERIVE_OUTPUTS)?;
    let mut entries = Vec::new();
    let mut styles = Vec::new();
    for el in &scene.elements {
        let m = &el.meta;
        let file = element_file(m.element_id);
        write_bytes(dir, &file, &codec::encode_bgra(&el.bitmap.bgra))?;
        entries.push(MetaEntry {
            element_id: m.element_id,
            xpath: m.xpath.clone(),
            z_index: m.z_index.clone(),
            rect: m.rect,
            kind: m.kind,
            doc_order: m.doc_order,
            class: m.class_label(),
            bitmap: file,
            anchor: el.bitmap.anchor,
        });
        styles.push(StyleEntry { element_id: m.element_id, computed_style: m.computed_style.clone() });
    }
    let meta = MetaDoc {
        schema_version: SCHEMA_VERSION,
        canvas: scene.canvas,
        page_background: scene.page_background,
        source: scene.source,
        elements: entries,
    };
    write_json(dir, META, &meta)?;
    write_json(dir, STYLES, &StylesDoc { schema_version: SCHEMA_VERSION, elements: styles })
}

pub fn read_scene(dir: &Path) -> Result<Scene> {
    let meta: MetaDoc = read_json(dir, META)?;
    let styles: StylesDoc = read_json(dir, STYLES)?;
    let mut by_id: BTreeMap<ElementId, BTreeMap<String, String>> =
        styles.elements.into_iter().map(|s| (s.element_id, s.computed_style)).collect();
    let mut elements = Vec::new();
    for e in meta.elements {
        let bgra = read_png(dir, &e.bitmap, codec::decode_bgra)?;
        elements.push(SceneElement {
            meta: ElementMeta {
                element_id: e.element_id,
                xpath: e.xpath,
                z_index: e.z_index,
                rect: e.rect,
                kind: e.kind,
                doc_order: e.doc_order,
                computed_style: by_id.remove(&e.element_id).unwrap_or_default(),
            },
            bitmap: ElementBitmap { element_id: e.element_id, bgra, anchor: e.anchor },
        });
    }
    let scene = Scene { canvas: meta.canvas, page_background: meta.page_background, elements, source: meta.source };
    let report = validate_scene(&scene);
    if !report.is_ok() {
        return Err(Error::Invariant { path: dir.join(META), report });
    }
    Ok(scene)
}

// ------------------------------------------------------------------- layering

pub fn write_layering(dir: &Path, layering: &Layering) -> Result<()> {
    remove(dir, &LAYERIZE_OUTPUTS)?;
    let doc = LayersDoc { schema_version: SCHEMA_VERSION, k: layering.k(), layers: layering.layers().to_vec() };
    write_json(dir, LAYERS, &doc)
}

pub fn read_layering(dir: &Path) -> Result<Layering> {
    let doc: LayersDoc = read_json(dir, LAYERS)?;
    if doc.k != doc.layers.len() {
        let mut report = ValidationReport::default();
        report.push("layer-count", None, format!("k = {} but {} layers listed", doc.k, doc.layers.len()));
        return Err(Error::Invariant { path: dir.join(LAYERS), report });
    }
    Ok(Layering::new(doc.layers))
}

// ---------------------------------------------------------------- annotations

fn bbox_doc(scene: &Scene, annotations: &AnnotationSet) -> BBoxesDoc {
    let labels: BTreeSet<String> = scene.elements.iter().map(|e| e.meta.class_label()).collect();
    let category: BTreeMap<String, u64> = labels.iter().enumerate().map(|(i, l)| (l.clone(), i as u64 + 1)).collect();
    let annotations = scene
        .elements
        .iter()
        .filter_map(|el| {
            let a = annotations.get(el.id())?;
            let [x, y, w, h] = a.bbox.xywh()?;
            Some(CocoAnnotation {
                id: el.id().0 as u64 + 1,
                image_id: 1,
                element_id: el.id(),
                category_id: category[&el.meta.class_label()],
                bbox: [x as i64, y as i64, w as i64, h as i64],
                area: a.mask.bits.count() as i64,
                iscrowd: 0,
            })
        })
        .collect();
    BBoxesDoc {
        schema_version: SCHEMA_VERSION,
        images: vec![CocoImage { id: 1, file_name: SCREENSHOT.into(), width: scene.canvas.0, height: scene.canvas.1 }],
        annotations,
        categories: category.into_iter().map(|(name, id)| CocoCategory { id, name }).collect(),
    }
}

/// Writes masks, contours, bboxes and the manifest.
pub fn write_annotations(dir: &Path, info: &SampleInfo, scene: &Scene, layering: &Layering, annotations: &AnnotationSet) -> Result<Manifest> {
    remove(dir, &EXPORT_OUTPUTS)?;
    let layer_of = layering.layer_of();
    let mut entries = Vec::new();
    let mut contours = Vec::new();
    for el in &scene.elements {
        let id = el.id();
        let a = annotations.get(id).ok_or(Error::UnknownElement(id))?;
        write_bytes(dir, &mask_file(id), &codec::encode_mask(&a.mask.bits))?;
        contours.push(ContourEntry { element_id: id, contours: a.contours.clone() });
        entries.push(ManifestEntry {
            element_id: id,
            xpath: el.meta.xpath.clone(),
            kind: el.meta.kind,
            class: el.meta.class_label(),
            layer: *layer_of.get(&id).ok_or_else(|| Error::LayeringMismatch(format!("{id} has no layer")))?,
            bbox: a.bbox.xywh().map(|b| b.map(i64::from)),
            visible: a.visible(),
            bitmap: element_file(id),
            mask: mask_file(id),
        });
    }
    write_json(dir, CONTOURS, &ContoursDoc { schema_version: SCHEMA_VERSION, elements: contours })?;
    write_json(dir, BBOXES, &bbox_doc(scene, annotations))?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        sample_id: info.sample_id.clone(),
        source: info.source.clone(),
        viewport: scene.canvas,
        tool_version: TOOL_VERSION.into(),
        config_hash: info.config_hash.clone(),
        files: [SCREENSHOT, META, STYLES, LAYERS, CONTOURS, BBOXES].map(String::from).to_vec(),
        elements: entries,
    };
    write_json(dir, MANIFEST, &manifest)?;
    Ok(manifest)
}

fn bbox_from(raw: [i64; 4]) -> Option<BBox> {
    let [x, y, w, h] = raw;
    if x < 0 || y < 0 || w <= 0 || h <= 0 || [x, y, w, h].iter().any(|&v| v > u32::MAX as i64) {
        return None;
    }
    Some(BBox::Rect { x: x as u32, y: y as u32, w: w as u32, h: h as u32 })
}

fn read_annotations(dir: &Path, manifest: &Manifest, scene: &Scene) -> Result<AnnotationSet> {
    let contours: ContoursDoc = read_json(dir, CONTOURS)?;
    let bboxes: BBoxesDoc = read_json(dir, BBOXES)?;
    let mut report = ValidationReport::default();
    let mut boxes = BTreeMap::new();
    for a in &bboxes.annotations {
        match bbox_from(a.bbox) {
            Some(b) => {
                if boxes.insert(a.element_id, b).is_some() {
                    report.push("bbox-unique", Some(a.element_id), "element has two boxes");
                }
            }
            None => report.push("bbox-size", Some(a.element_id), format!("malformed box {:?}", a.bbox)),
        }
    }
    if !report.is_ok() {
        return Err(Error::Invariant { path: dir.join(BBOXES), report });
    }
    let mut by_id: BTreeMap<ElementId, Vec<Contour>> = contours.elements.into_iter().map(|c| (c.element_id, c.contours)).collect();
    let mut elements = Vec::new();
    for entry in &manifest.elements {
        let id = entry.element_id;
        let bits = read_png(dir, &entry.mask, codec::decode_mask)?;
        if bits.dimensions() != scene.canvas {
            return Err(Error::corrupt(dir.join(&entry.mask), format!("mask size {:?} differs from canvas {:?}", bits.dimensions(), scene.canvas)));
        }
        elements.push(ElementAnnotation {
            mask: Mask { element_id: id, bits },
            contours: by_id.remove(&id).unwrap_or_default(),
            bbox: boxes.remove(&id).unwrap_or(BBox::Empty),
        });
    }
    if let Some(id) = by_id.keys().chain(boxes.keys()).next() {
        let mut report = ValidationReport::default();
        report.push("annotation-element", Some(*id), "annotation for an element missing from the manifest");
        return Err(Error::Invariant { path: dir.to_path_buf(), report });
    }
    Ok(AnnotationSet { elements })
}

// --------------------------------------------------------------------- sample

/// Writes the complete layout: screenshot (rendered when not given), scene,
/// layering, annotations and manifest.
pub fn write_sample(
    dir: &Path,
    info: &SampleInfo,
    scene: &Scene,
    layering: &Layering,
    annotations: &AnnotationSet,
    screenshot: Option<&BgrRaster>,
) -> Result<Manifest> {
    let report = validate_scene(scene);
    if !report.is_ok() {
        return Err(Error::Invariant { path: dir.to_path_buf(), report });
    }
    let mut graph = build_stack_graph(scene);
    graph.break_cycles();
    let report = validate_layering(scene, &graph, layering);
    if !report.is_ok() {
        return Err(Error::Invariant { path: dir.join(LAYERS), report });
    }
    let rendered;
    let shot = match screenshot {
        Some(s) => s,
        None => {
            rendered = render_scene(scene, layering, None)?.quantized();
            &rendered
        }
    };
    write_bytes(dir, SCREENSHOT, &codec::encode_bgr(shot))?;
    write_scene(dir, scene)?;
    write_layering(dir, layering)?;
    write_annotations(dir, info, scene, layering, annotations)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let manifest: Manifest = read_json(dir, MANIFEST)?;
    for rel in manifest.referenced_files() {
        let path = dir.join(&rel);
        if !path.is_file() {
            return Err(Error::MissingFile { path });
        }
    }
    Ok(manifest)
}

pub fn read_sample(dir: &Path) -> Result<Sample> {
    let manifest = read_manifest(dir)?;
    let scene = read_scene(dir)?;
    let layering = read_layering(dir)?;
    let ids: BTreeSet<ElementId> = scene.ids().collect();
    let listed: BTreeSet<ElementId> = manifest.elements.iter().map(|e| e.element_id).collect();
    if ids != listed {
        let mut report = ValidationReport::default();
        report.push("manifest-elements", None, format!("manifest lists {listed:?}, scene has {ids:?}"));
        return Err(Error::Invariant { path: dir.join(MANIFEST), report });
    }
    let annotations = read_annotations(dir, &manifest, &scene)?;
    Ok(Sample { manifest, scene, layering, annotations })
}

/// Runs every validator over a sample directory. Structural problems
/// (missing, corrupt or malformed files) are errors; invariant violations
/// are collected in the report.
pub fn verify_sample(dir: &Path, config_hash: Option<&str>) -> Result<ValidationReport> {
    let sample = read_sample(dir)?;
    let Sample { manifest, scene, layering, annotations } = &sample;
    let mut report = validate_scene(scene);
    let mut graph = build_stack_graph(scene);
    graph.break_cycles();
    report.extend(validate_layering(scene, &graph, layering));

    if let Some(hash) = config_hash {
        if hash != manifest.config_hash {
            report.push("config-hash", None, format!("manifest hash {} differs from {hash}", manifest.config_hash));
        }
    }
    let layer_of = layering.layer_of();
    for entry in &manifest.elements {
        let id = entry.element_id;
        let a = annotations.get(id).expect("read_annotations covers the manifest");
        let el = scene.element(id).expect("ids checked by read_sample");
        if layer_of.get(&id) != Some(&entry.layer) {
            report.push("manifest-layer", Some(id), format!("manifest layer {} differs from layers.json", entry.layer));
        }
        if entry.visible != a.visible() {
            report.push("manifest-visible", Some(id), "visibility flag disagrees with the mask");
        }
        if entry.bbox != a.bbox.xywh().map(|b| b.map(i64::from)) {
            report.push("manifest-bbox", Some(id), format!("manifest box {:?} differs from bboxes.json {:?}", entry.bbox, a.bbox));
        }
        if !bbox_is_tight(&a.mask.bits, &a.bbox) {
            report.push("bbox-tight", Some(id), format!("{:?} is not the minimal box of the mask", a.bbox));
        }
        if let Some((x, y)) = a.mask.bits.iter_set().find(|&(x, y)| el.bitmap.alpha_at(x as i64, y as i64) <= 0.0) {
            report.push("mask-support", Some(id), format!("mask pixel ({x},{y}) lies outside the element's support"));
        }
        for c in &a.contours {
            report.extend(check_contour(&a.mask.bits, c, id));
        }
        if a.visible() && a.contours.is_empty() {
            report.push("contour", Some(id), "visible element without contours");
        }
    }
    Ok(report)
}

// --------------------------------------------------------------------- stages

/// Derives element bitmaps from the capture groups of a sample.
pub fn derive_stage(dir: &Path, cfg: &DerivationConfig) -> Result<Scene> {
    let (doc, page) = read_capture(dir)?;
    let mut elements = Vec::new();
    for (meta, group) in &page.elements {
        let bitmap = match group {
            CaptureGroup::Graphic(g) => derive_graphic(g, cfg)?,
            CaptureGroup::Text(t) => derive_text(t, cfg)?,
        };
        elements.push(SceneElement { meta: meta.clone(), bitmap });
    }
    let scene = Scene { canvas: page.viewport, page_background: page.page_background, elements, source: doc.origin };
    let report = validate_scene(&scene);
    if !report.is_ok() {
        return Err(Error::Invariant { path: dir.join(CAPTURE), report });
    }
    remove(dir, &LAYERIZE_OUTPUTS)?;
    remove(dir, &EXPORT_OUTPUTS)?;
    write_scene(dir, &scene)?;
    Ok(scene)
}

/// Builds the stack graph of the derived scene and writes its minimum layering.
pub fn layerize_stage(dir: &Path) -> Result<Layering> {
    let scene = read_scene(dir)?;
    let mut graph = build_stack_graph(&scene);
    graph.break_cycles();
    let layering = assign_layers(&graph)?;
    let report = validate_layering(&scene, &graph, &layering);
    if !report.is_ok() {
        return Err(Error::Invariant { path: dir.join(LAYERS), report });
    }
    remove(dir, &EXPORT_OUTPUTS)?;
    write_layering(dir, &layering)?;
    Ok(layering)
}

/// Computes annotations and writes the export files and manifest.
pub fn export_stage(dir: &Path, info: &SampleInfo) -> Result<Manifest> {
    let scene = read_scene(dir)?;
    let layering = read_layering(dir)?;
    let annotations = annotate_scene(&scene, &layering, MaskThreshold::Float)?;
    if !dir.join(SCREENSHOT).is_file() {
        write_bytes(dir, SCREENSHOT, &codec::encode_bgr(&render_scene(&scene, &layering, None)?.quantized()))?;
    }
    write_annotations(dir, info, &scene, &layering, &annotations)
}

/// Writes a synthetic sample: the simulated 8-bit capture groups of a seeded
/// scene plus the complete ground-truth export. Running the derive, layerize
/// and export stages afterwards replaces the ground truth with recovered data.
pub fn synth_sample(dir: &Path, params: &SynthParams, config: &Config) -> Result<Manifest> {
    let synth = synth_scene(params)?;
    let scene = &synth.scene;
    let source = format!("synth:{}", params.seed);
    let cfg = CaptureConfig { viewport: scene.canvas, dead_band_fraction: 0.0, ..config.capture.clone() };
    let mut page = SimulatedPage::from_synth(&synth, true);
    let captured = match capture_page(&mut page, &source, &cfg)? {
        PageOutcome::Captured(c) => c,
        PageOutcome::Dead => CapturedPage {
            url: source.clone(),
            viewport: scene.canvas,
            page_background: scene.page_background,
            screenshot: render_scene(scene, &synth.layering, None)?.quantized(),
            elements: Vec::new(),
            discarded: Vec::new(),
        },
    };
    write_capture(dir, &captured, SceneSource::Synthetic)?;
    let annotations = annotate_scene(scene, &synth.layering, MaskThreshold::Float)?;
    let info = SampleInfo { sample_id: sample_id_of(dir), source, config_hash: config.hash() };
    write_sample(dir, &info, scene, &synth.layering, &annotations, Some(&captured.screenshot))
}

fn sample_id_of(dir: &Path) -> String {
    dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Sample id and source recorded by earlier stages, falling back to the directory name.
pub fn sample_info(dir: &Path, config_hash: &str) -> SampleInfo {
    let sample_id = sample_id_of(dir);
    let source = read_json::<CaptureDoc>(dir, CAPTURE)
        .map(|d| d.source)
        .or_else(|_| read_json::<Manifest>(dir, MANIFEST).map(|m| m.source))
        .unwrap_or_else(|_| sample_id.clone());
    SampleInfo { sample_id, source, config_hash: config_hash.to_string() }
}

/// True if `dir` holds the output of any stage.
pub fn is_sample_dir(dir: &Path) -> bool {
    [CAPTURE, META, MANIFEST].iter().any(|f| dir.join(f).is_file())
}

/// `root` itself if it is a sample, otherwise its sample subdirectories in name order.
pub fn find_samples(root: &Path) -> Result<Vec<PathBuf>> {
    if is_sample_dir(root) {
        return Ok(vec![root.to_path_buf()]);
    }
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && is_sample_dir(p))
        .collect();
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn info() -> SampleInfo {
        SampleInfo { sample_id: "00000-test".into(), source: "synth:1".into(), config_hash: "abc".into() }
    }

    fn write_synth(dir: &Path, seed: u64) -> crate::synth::Synthesized {
        let s = synth_scene(&SynthParams { seed, ..Default::default() }).unwrap();
        let ann = annotate_scene(&s.scene, &s.layering, MaskThreshold::Float).unwrap();
        write_sample(dir, &info(), &s.scene, &s.layering, &ann, None).unwrap();
        s
    }

    #[test]
    fn empty_scene_writes_screenshot_and_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let scene = Scene::empty(20, 10, Bgr::WHITE);
        let layering = Layering::default();
        let m = write_sample(dir.path(), &info(), &scene, &layering, &AnnotationSet::default(), None).unwrap();
        assert!(m.elements.is_empty());
        assert!(dir.path().join(SCREENSHOT).is_file());
        let back = read_sample(dir.path()).unwrap();
        assert_eq!(back.scene, scene);
        assert!(verify_sample(dir.path(), None).unwrap().is_ok());
    }

    #[test]
    fn all_artifacts_present_and_cross_referenced() {
        let dir = tempfile::tempdir().unwrap();
        let s = synth_scene(&SynthParams { seed: 5, element_count: (1, 1), ..Default::default() }).unwrap();
        let ann = annotate_scene(&s.scene, &s.layering, MaskThreshold::Float).unwrap();
        let m = write_sample(dir.path(), &info(), &s.scene, &s.layering, &ann, None).unwrap();
        for f in [SCREENSHOT, META, STYLES, LAYERS, CONTOURS, BBOXES, MANIFEST, "elements/000.png", "masks/000.png"] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        assert_eq!(m.elements[0].bitmap, "elements/000.png");
        assert_eq!(m.elements[0].layer, 1);
        assert_eq!(m.elements[0].bbox, ann.elements[0].bbox.xywh().map(|b| b.map(i64::from)));
    }

    #[test]
    fn round_trip_within_one_quantization_step() {
        let dir = tempfile::tempdir().unwrap();
        let s = write_synth(dir.path(), 11);
        let back = read_sample(dir.path()).unwrap();
        assert_eq!(back.layering, s.layering);
        assert_eq!(back.scene.canvas, s.scene.canvas);
        for (a, b) in back.scene.elements.iter().zip(&s.scene.elements) {
            assert_eq!(a.meta, b.meta);
            assert_eq!(a.bitmap.anchor, b.bitmap.anchor);
            for (p, q) in a.bitmap.bgra.pixels().iter().zip(b.bitmap.bgra.pixels()) {
                assert!((p.a - q.a).abs() <= 0.5 / 255.0 + 1e-12);
                if q.a > 0.0 {
                    assert!(p.bgr().max_abs_diff(q.bgr()) <= 0.5 + 1e-9);
                }
            }
        }
        let ann = annotate_scene(&s.scene, &s.layering, MaskThreshold::Float).unwrap();
        assert_eq!(back.annotations, ann);
        assert!(verify_sample(dir.path(), Some("abc")).unwrap().is_ok());
        assert!(verify_sample(dir.path(), Some("other")).unwrap().has_rule("config-hash"));
    }

    #[test]
    fn writing_twice_is_byte_identical() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_synth(a.path(), 3);
        write_synth(b.path(), 3);
        for f in [SCREENSHOT, META, STYLES, LAYERS, CONTOURS, BBOXES, MANIFEST, "masks/000.png", "elements/001.png"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn missing_mask_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_synth(dir.path(), 4);
        std::fs::remove_file(dir.path().join("masks/002.png")).unwrap();
        let err = read_sample(dir.path()).unwrap_err();
        assert!(matches!(err, Error::MissingFile { .. }));
        assert!(err.to_string().contains("masks/002.png"), "{err}");
    }

    #[test]
    fn negative_bbox_width_is_an_invariant_error() {
        let dir = tempfile::tempdir().unwrap();
        write_synth(dir.path(), 4);
        let path = dir.path().join(BBOXES);
        let mut doc: BBoxesDoc = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
        doc.annotations[0].bbox[2] = -3;
        std::fs::write(&path, serde_json::to_vec(&doc).unwrap()).unwrap();
        match read_sample(dir.path()) {
            Err(Error::Invariant { report, .. }) => assert!(report.has_rule("bbox-size")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn loose_bbox_fails_verification() {
        let dir = tempfile::tempdir().unwrap();
        write_synth(dir.path(), 4);
        let path = dir.path().join(BBOXES);
        let mut doc: BBoxesDoc = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
        doc.annotations[0].bbox[2] += 1;
        std::fs::write(&path, serde_json::to_vec(&doc).unwrap()).unwrap();
        let report = verify_sample(dir.path(), None).unwrap();
        assert!(report.has_rule("bbox-tight"));
        assert!(report.has_rule("manifest-bbox"));
    }

    #[test]
    fn schema_and_corruption_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_synth(dir.path(), 6);
        std::fs::write(dir.path().join("elements/000.png"), b"junk").unwrap();
        let err = read_sample(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Corrupt { ref path, .. } if path.ends_with("elements/000.png")), "{err}");

        let path = dir.path().join(LAYERS);
        let text = std::fs::read_to_string(&path).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 9");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(read_layering(dir.path()), Err(Error::SchemaVersion { found: 9, .. })));
    }

    #[test]
    fn synth_then_stages_recover_the_scene() {
        let dir = tempfile::tempdir().unwrap();
        let params = SynthParams { seed: 21, ..Default::default() };
        let config = Config::default();
        let truth = synth_sample(dir.path(), &params, &config).unwrap();
        assert!(verify_sample(dir.path(), Some(&config.hash())).unwrap().is_ok());

        derive_stage(dir.path(), &config.derivation).unwrap();
        assert!(!dir.path().join(MANIFEST).exists());
        layerize_stage(dir.path()).unwrap();
        let info = sample_info(dir.path(), &config.hash());
        assert_eq!(info.source, "synth:21");
        let derived = export_stage(dir.path(), &info).unwrap();
        assert!(verify_sample(dir.path(), None).unwrap().is_ok());
        assert_eq!(derived.elements.len(), truth.elements.len());
        let k = |m: &Manifest| m.elements.iter().map(|e| e.layer).max();
        assert_eq!(k(&derived), k(&truth));
    }

    #[test]
    fn sample_names_and_discovery() {
        assert_eq!(sample_dir_name(3, "x"), format!("00003-{}", "2d711642"));
        let root = tempfile::tempdir().unwrap();
        for name in ["b", "a"] {
            write_synth(&root.path().join(name), 1);
        }
        std::fs::create_dir(root.path().join("junk")).unwrap();
        let found = find_samples(root.path()).unwrap();
        assert_eq!(found, vec![root.path().join("a"), root.path().join("b")]);
        assert_eq!(find_samples(&found[0]).unwrap(), vec![found[0].clone()]);
    }
}
