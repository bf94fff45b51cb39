//! Shared scene and element types.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::raster::{BgraRaster, Bgr, Rect};

/// Identifies one element within a page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub u32);

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Computed `z-index` of an element. Anything that is not an integer (e.g.
/// `auto`) is kept verbatim as a keyword and compares as non-numeric.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ZIndex {
    Numeric(i64),
    Keyword(String),
}

impl ZIndex {
    pub fn auto() -> Self {
        ZIndex::Keyword("auto".into())
    }

    pub fn numeric(&self) -> Option<i64> {
        match self {
            ZIndex::Numeric(v) => Some(*v),
            ZIndex::Keyword(_) => None,
        }
    }

    /// Parses a computed-style value; integers become numeric.
    pub fn parse(s: &str) -> Self {
        match s.trim().parse::<i64>() {
            Ok(v) => ZIndex::Numeric(v),
            Err(_) => ZIndex::Keyword(s.trim().to_string()),
        }
    }
}

impl Default for ZIndex {
    fn default() -> Self {
        ZIndex::auto()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Graphic,
    Text,
}

/// DOM facts for one element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementMeta {
    pub element_id: ElementId,
    pub xpath: String,
    pub z_index: ZIndex,
    pub rect: Rect,
    pub kind: NodeKind,
    pub doc_order: u32,
    #[serde(default)]
    pub computed_style: BTreeMap<String, String>,
}

impl ElementMeta {
    /// Class label for detection datasets: the tag name of the last XPath step.
    pub fn class_label(&self) -> String {
        xpath_steps(&self.xpath)
            .last()
            .map(|(tag, _)| tag.to_string())
            .unwrap_or_else(|| "element".to_string())
    }
}

/// Splits an absolute XPath into `(tag, index)` steps; an omitted index is 1.
pub fn xpath_steps(xpath: &str) -> Vec<(&str, u32)> {
    xpath
        .split('/')
        .filter(|s| !s.is_empty())
        .map(|step| match step.find('[') {
            Some(open) => {
                let idx = step[open + 1..].trim_end_matches(']').parse().unwrap_or(1);
                (&step[..open], idx)
            }
            None => (step, 1),
        })
        .collect()
}

/// True iff `ancestor` is a proper ancestor of `descendant` in the DOM.
pub fn is_xpath_ancestor(ancestor: &str, descendant: &str) -> bool {
    let a = xpath_steps(ancestor);
    let d = xpath_steps(descendant);
    a.len() < d.len() && !a.is_empty() && a.iter().zip(&d).all(|(x, y)| x == y)
}

/// Recovered foreground of one element, placed at `anchor` on the page canvas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementBitmap {
    pub element_id: ElementId,
    pub bgra: BgraRaster,
    pub anchor: (i32, i32),
}

impl ElementBitmap {
    /// Canvas-space extent of the bitmap.
    pub fn extent(&self) -> Rect {
        Rect::new(self.anchor.0, self.anchor.1, self.bgra.width(), self.bgra.height())
    }

    /// Alpha at canvas coordinate `(x, y)`, zero outside the bitmap.
    pub fn alpha_at(&self, x: i64, y: i64) -> f64 {
        let lx = x - self.anchor.0 as i64;
        let ly = y - self.anchor.1 as i64;
        if lx < 0 || ly < 0 || lx >= self.bgra.width() as i64 || ly >= self.bgra.height() as i64 {
            return 0.0;
        }
        self.bgra.get(lx as u32, ly as u32).a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneSource {
    Captured,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneElement {
    pub meta: ElementMeta,
    pub bitmap: ElementBitmap,
}

impl SceneElement {
    pub fn id(&self) -> ElementId {
        self.meta.element_id
    }
}

/// A page: canvas, backdrop color and its elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub canvas: (u32, u32),
    pub page_background: Bgr,
    pub elements: Vec<SceneElement>,
    pub source: SceneSource,
}

impl Scene {
    pub fn empty(width: u32, height: u32, page_background: Bgr) -> Self {
        Scene { canvas: (width, height), page_background, elements: Vec::new(), source: SceneSource::Synthetic }
    }

    pub fn element(&self, id: ElementId) -> Option<&SceneElement> {
        self.elements.iter().find(|e| e.id() == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.elements.iter().map(SceneElement::id)
    }

    pub fn canvas_rect(&self) -> Rect {
        Rect::new(0, 0, self.canvas.0, self.canvas.1)
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element: Option<ElementId>,
    pub detail: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.element {
            Some(id) => write!(f, "[{}] element {}: {}", self.rule, id, self.detail),
            None => write!(f, "[{}] {}", self.rule, self.detail),
        }
    }
}

/// Output of every validator. Empty iff the checked value is well-formed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn push(&mut self, rule: &str, element: Option<ElementId>, detail: impl Into<String>) {
        self.findings.push(Finding { rule: rule.to_string(), element, detail: detail.into() });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.findings.extend(other.findings);
    }

    pub fn mentions(&self, id: ElementId) -> bool {
        self.findings.iter().any(|f| f.element == Some(id))
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.findings.iter().any(|f| f.rule == rule)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "{finding}")?;
        }
        Ok(())
    }
}

fn channel_ok(v: f64) -> bool {
    (0.0..=255.0).contains(&v)
}

/// Checks every scene-level invariant and reports all violations.
pub fn validate_scene(scene: &Scene) -> ValidationReport {
    let mut report = ValidationReport::default();
    let (cw, ch) = scene.canvas;
    if cw == 0 || ch == 0 {
        report.push("canvas-size", None, format!("canvas {cw}x{ch} must be at least 1x1"));
    }
    if !scene.page_background.channels().into_iter().all(channel_ok) {
        report.push("channel-range", None, "page background outside [0,255]");
    }

    let mut seen = BTreeSet::new();
    let mut doc_orders = BTreeMap::new();
    let canvas = scene.canvas_rect();
    for el in &scene.elements {
        let id = el.meta.element_id;
        if !seen.insert(id) {
            report.push("unique-id", Some(id), "duplicate element_id");
        }
        if el.bitmap.element_id != id {
            report.push(
                "bitmap-id",
                Some(id),
                format!("bitmap carries element_id {}", el.bitmap.element_id),
            );
        }
        if let Some(prev) = doc_orders.insert(el.meta.doc_order, id) {
            report.push(
                "unique-doc-order",
                Some(id),
                format!("doc_order {} already used by {prev}", el.meta.doc_order),
            );
        }
        if el.meta.rect.is_empty() {
            report.push("rect-size", Some(id), "rect must have positive width and height");
        }
        let extent = el.bitmap.extent();
        if extent.is_empty() {
            report.push("bitmap-size", Some(id), "bitmap must be at least 1x1");
        } else if !canvas.contains_rect(&extent) {
            report.push(
                "bitmap-bounds",
                Some(id),
                format!(
                    "bitmap {}x{} at ({},{}) exceeds {}x{} canvas",
                    extent.w, extent.h, extent.x, extent.y, cw, ch
                ),
            );
        }
        let mut range_bad = false;
        let mut canon_bad = false;
        for p in el.bitmap.bgra.pixels() {
            if !(channel_ok(p.b) && channel_ok(p.g) && channel_ok(p.r) && (0.0..=1.0).contains(&p.a)) {
                range_bad = true;
            }
            if p.a == 0.0 && (p.b != 0.0 || p.g != 0.0 || p.r != 0.0) {
                canon_bad = true;
            }
        }
        if range_bad {
            report.push("channel-range", Some(id), "pixel outside BGR [0,255] / A [0,1]");
        }
        if canon_bad {
            report.push("canonical-zero", Some(id), "pixel with A=0 has nonzero color");
        }
    }
    report
}
