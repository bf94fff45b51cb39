//! A [`PageOps`] implementation backed by a synthetic scene.
//!
//! Each scene element behaves like one DOM node addressed by its XPath.
//! Inline-style edits are tracked the same way the page scripts track them,
//! so restoration and the mutation sentinel can be exercised without a
//! browser. Faults can be injected to drive the retry and discard paths.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use super::{Ack, ClientRect, PageMetadata, PageOps, RawNode, TextPaint};
use crate::compositor::{render_mapped, RenderOptions};
use crate::error::{Error, Result};
use crate::layers::Layering;
use crate::model::{ElementId, NodeKind, Scene, ZIndex};
use crate::raster::{BgrRaster, Bgr, Bgra, Rect};
use crate::synth::Synthesized;

#[derive(Debug, Clone, Default)]
pub struct Faults {
    /// Screenshot indices (0-based, counted over the page's lifetime) during
    /// which a DOM mutation is reported.
    pub mutate_on_shots: BTreeSet<usize>,
    /// Handles that no longer resolve.
    pub removed: BTreeSet<String>,
    /// Handles whose inline style is not put back by `restore_styles`.
    pub sticky_styles: BTreeSet<String>,
    pub navigation_error: bool,
}

#[derive(Debug, Clone)]
pub struct SimulatedPage {
    scene: Scene,
    layering: Layering,
    quantize: bool,
    pub faults: Faults,
    hidden: BTreeSet<ElementId>,
    text_hidden: BTreeSet<ElementId>,
    text_color: BTreeMap<ElementId, Bgr>,
    root: Option<Bgr>,
    /// Mirror of the script's mapping table: handles with a modified inline style.
    touched: BTreeSet<String>,
    mutations: u64,
    shots: usize,
    prepared: bool,
}

impl SimulatedPage {
    pub fn new(scene: Scene, layering: Layering, quantize: bool) -> Self {
        SimulatedPage {
            scene,
            layering,
            quantize,
            faults: Faults::default(),
            hidden: BTreeSet::new(),
            text_hidden: BTreeSet::new(),
            text_color: BTreeMap::new(),
            root: None,
            touched: BTreeSet::new(),
            mutations: 0,
            shots: 0,
            prepared: false,
        }
    }

    pub fn from_synth(s: &Synthesized, quantize: bool) -> Self {
        SimulatedPage::new(s.scene.clone(), s.layering.clone(), quantize)
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn screenshots_taken(&self) -> usize {
        self.shots
    }

    fn resolve(&self, handle: &str) -> Option<ElementId> {
        if self.faults.removed.contains(handle) {
            return None;
        }
        self.scene.elements.iter().find(|e| e.meta.xpath == handle).map(|e| e.id())
    }

    fn inline_style_of(&self, e: ElementId) -> Option<String> {
        let mut decls = Vec::new();
        if self.hidden.contains(&e) {
            decls.push("visibility: hidden !important;".to_string());
        }
        if self.text_hidden.contains(&e) {
            decls.push("color: transparent !important;".to_string());
        } else if let Some(c) = self.text_color.get(&e) {
            decls.push(format!("color: rgb({}, {}, {}) !important;", c.r, c.g, c.b));
        }
        (!decls.is_empty()).then(|| decls.join(" "))
    }
}

impl PageOps for SimulatedPage {
    fn navigate(&mut self, url: &str, _timeout: Duration) -> Result<()> {
        if self.faults.navigation_error {
            return Err(Error::Navigation(format!("{url}: connection refused")));
        }
        Ok(())
    }

    fn prepare(&mut self) -> Result<()> {
        self.prepared = true;
        Ok(())
    }

    fn collect_metadata(&mut self) -> Result<PageMetadata> {
        if !self.prepared {
            return Err(Error::Script("helpers not installed".into()));
        }
        let mut els: Vec<_> = self.scene.elements.iter().collect();
        els.sort_by_key(|e| e.meta.doc_order);
        let nodes = els
            .iter()
            .map(|e| {
                let m = &e.meta;
                RawNode {
                    xpath: m.xpath.clone(),
                    tag: m.class_label(),
                    doc_order: m.doc_order,
                    rect: ClientRect { x: m.rect.x as f64, y: m.rect.y as f64, width: m.rect.w as f64, height: m.rect.h as f64 },
                    z_index: match &m.z_index {
                        ZIndex::Numeric(n) => n.to_string(),
                        ZIndex::Keyword(k) => k.clone(),
                    },
                    display: "block".into(),
                    visibility: "visible".into(),
                    opacity: "1".into(),
                    has_background: m.kind == NodeKind::Graphic,
                    text: if m.kind == NodeKind::Text { "text".into() } else { String::new() },
                    pseudo: None,
                    computed_style: m.computed_style.clone(),
                }
            })
            .collect();
        let bg = self.scene.page_background;
        Ok(PageMetadata {
            node_count: self.scene.elements.len() + 3,
            root_background: format!("rgb({}, {}, {})", bg.r, bg.g, bg.b),
            nodes,
        })
    }

    fn set_hidden(&mut self, handles: &[String], hidden: bool) -> Result<Vec<Ack>> {
        Ok(handles
            .iter()
            .map(|h| match self.resolve(h) {
                Some(id) => {
                    self.touched.insert(h.clone());
                    if hidden {
                        self.hidden.insert(id);
                    } else {
                        self.hidden.remove(&id);
                    }
                    Ack::Ok
                }
                None => Ack::Stale,
            })
            .collect())
    }

    fn isolate(&mut self, target: &str) -> Result<Ack> {
        let Some(id) = self.resolve(target) else { return Ok(Ack::Stale) };
        let others: Vec<String> = self.scene.elements.iter().filter(|e| e.id() != id).map(|e| e.meta.xpath.clone()).collect();
        self.set_hidden(&others, true)?;
        self.hidden.remove(&id);
        Ok(Ack::Ok)
    }

    fn hide_own_text(&mut self, target: &str) -> Result<Ack> {
        // Synthetic graphic elements carry no text of their own.
        Ok(if self.resolve(target).is_some() { Ack::Ok } else { Ack::Stale })
    }

    fn set_root_background(&mut self, color: Option<Bgr>) -> Result<()> {
        self.root = color;
        Ok(())
    }

    fn set_text_color(&mut self, handle: &str, paint: TextPaint) -> Result<Ack> {
        let Some(id) = self.resolve(handle) else { return Ok(Ack::Stale) };
        self.touched.insert(handle.to_string());
        match paint {
            TextPaint::Color(c) => {
                self.text_hidden.remove(&id);
                self.text_color.insert(id, c);
            }
            TextPaint::Hidden => {
                self.text_hidden.insert(id);
            }
            TextPaint::Restore => {
                self.text_hidden.remove(&id);
                self.text_color.remove(&id);
            }
        }
        Ok(Ack::Ok)
    }

    fn restore_styles(&mut self) -> Result<()> {
        let sticky: Vec<ElementId> = self.faults.sticky_styles.iter().filter_map(|h| self.resolve(h)).collect();
        self.hidden.retain(|id| sticky.contains(id));
        self.text_hidden.clear();
        self.text_color.clear();
        self.touched.retain(|h| self.faults.sticky_styles.contains(h));
        Ok(())
    }

    fn inline_styles(&mut self) -> Result<BTreeMap<String, Option<String>>> {
        Ok(self.scene.elements.iter().map(|e| (e.meta.xpath.clone(), self.inline_style_of(e.id()))).collect())
    }

    fn mutation_count(&mut self) -> Result<u64> {
        Ok(self.mutations)
    }

    fn screenshot(&mut self, clip: Rect) -> Result<BgrRaster> {
        if self.faults.mutate_on_shots.contains(&self.shots) {
            self.mutations += 1;
        }
        self.shots += 1;
        let opts = RenderOptions { background: self.root, exclude: None, clip: Some(clip) };
        let page = render_mapped(&self.scene, &self.layering, opts, |el, p| {
            let id = el.id();
            let text_hidden = el.meta.kind == NodeKind::Text && self.text_hidden.contains(&id);
            if self.hidden.contains(&id) || text_hidden {
                Bgra::TRANSPARENT
            } else if let (NodeKind::Text, Some(c)) = (el.meta.kind, self.text_color.get(&id)) {
                c.with_alpha(p.a)
            } else {
                p
            }
        })?;
        let shot = page
            .crop(clip)
            .ok_or_else(|| Error::Protocol(format!("clip {clip:?} outside the viewport")))?;
        Ok(if self.quantize { shot.quantized() } else { shot })
    }
}
