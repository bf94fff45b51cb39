//! Browser capture of chroma-key screenshot groups.
//!
//! The driver is written against [`PageOps`], the set of page manipulations
//! the in-page scripts provide. [`cdp::CdpPage`] implements it over the
//! DevTools protocol; [`sim::SimulatedPage`] implements it on top of a
//! synthetic scene so the whole capture flow runs without a browser.

pub mod cdp;
pub mod scripts;
pub mod server;
pub mod sim;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::derive::{GraphicGroup, TextGroup};
use crate::error::{Error, Result};
use crate::model::{ElementId, ElementMeta, NodeKind, ZIndex};
use crate::raster::{BgrRaster, Bgr, Rect};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptureConfig {
    pub viewport: (u32, u32),
    /// Navigation timeout in seconds.
    pub timeout_secs: f64,
    /// Extra wait after the load event before freezing the page, in milliseconds.
    pub settle_ms: u64,
    pub max_elements: usize,
    /// DevTools endpoint: `http://host:port` for discovery or a `ws://` target URL.
    pub devtools: String,
    /// Height of the top band used by the dead-page heuristic, as a viewport fraction.
    pub dead_band_fraction: f64,
    /// Pause between pages when crawling live URLs, in milliseconds.
    pub page_delay_ms: u64,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        CaptureConfig {
            viewport: (1920, 1080),
            timeout_secs: 30.0,
            settle_ms: 500,
            max_elements: 500,
            devtools: "http://127.0.0.1:9222".into(),
            dead_band_fraction: 0.1,
            page_delay_ms: 1000,
        }
    }
}

impl CaptureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.viewport.0 == 0 || self.viewport.1 == 0 {
            return Err(Error::Config("viewport must be positive".into()));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(Error::Config("timeout must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.dead_band_fraction) {
            return Err(Error::Config("dead_band_fraction must lie in [0,1]".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

/// Client rectangle as reported by the page, in CSS pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClientRect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

/// One node as reported by the metadata script, before filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawNode {
    pub xpath: String,
    pub tag: String,
    pub doc_order: u32,
    pub rect: ClientRect,
    pub z_index: String,
    pub display: String,
    pub visibility: String,
    pub opacity: String,
    pub has_background: bool,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub pseudo: Option<String>,
    #[serde(default)]
    pub computed_style: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageMetadata {
    pub node_count: usize,
    /// CSS color of the root backdrop, e.g. `rgb(255, 255, 255)`.
    #[serde(default)]
    pub root_background: String,
    pub nodes: Vec<RawNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateKind {
    Graphic,
    Text,
    PseudoGraphic,
}

impl CandidateKind {
    pub fn node_kind(self) -> NodeKind {
        match self {
            CandidateKind::Text => NodeKind::Text,
            CandidateKind::Graphic | CandidateKind::PseudoGraphic => NodeKind::Graphic,
        }
    }
}

/// A node that passed the visibility pre-filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateNode {
    pub xpath: String,
    pub kind: CandidateKind,
    pub z_index: ZIndex,
    /// Pixel-aligned and clipped to the viewport.
    pub rect: Rect,
    pub computed_style: BTreeMap<String, String>,
    pub doc_order: u32,
}

impl CandidateNode {
    pub fn to_meta(&self, element_id: ElementId) -> ElementMeta {
        ElementMeta {
            element_id,
            xpath: self.xpath.clone(),
            z_index: self.z_index.clone(),
            rect: self.rect,
            kind: self.kind.node_kind(),
            doc_order: self.doc_order,
            computed_style: self.computed_style.clone(),
        }
    }
}

/// A page with fewer than five nodes that all start inside the top band of
/// the viewport is treated as an error page and skipped.
pub fn detect_dead_page(meta: &PageMetadata, cfg: &CaptureConfig) -> bool {
    let band = cfg.viewport.1 as f64 * cfg.dead_band_fraction;
    meta.node_count < 5 && meta.nodes.iter().all(|n| n.rect.y < band)
}

/// Snaps a client rect outward to whole pixels and clips it to the viewport.
pub fn pixel_rect(r: &ClientRect, viewport: (u32, u32)) -> Option<Rect> {
    let x0 = r.x.floor().max(0.0);
    let y0 = r.y.floor().max(0.0);
    let x1 = (r.x + r.width).ceil().min(viewport.0 as f64);
    let y1 = (r.y + r.height).ceil().min(viewport.1 as f64);
    if !(x1 > x0 && y1 > y0) || r.width <= 0.0 || r.height <= 0.0 {
        return None;
    }
    Some(Rect::new(x0 as i32, y0 as i32, (x1 - x0) as u32, (y1 - y0) as u32))
}

fn invisible_by_css(n: &RawNode) -> bool {
    n.display.trim() == "none"
        || matches!(n.visibility.trim(), "hidden" | "collapse")
        || n.opacity.trim().parse::<f64>().map(|o| o <= 0.0).unwrap_or(false)
}

/// Applies the pre-filter and classifies the survivors. A node with both a
/// background and its own text yields a graphic candidate followed by a text
/// candidate. `doc_order` is renumbered over the returned list.
pub fn filter_candidate_nodes(meta: &PageMetadata, cfg: &CaptureConfig) -> Vec<CandidateNode> {
    let mut out = Vec::new();
    let mut nodes: Vec<&RawNode> = meta.nodes.iter().collect();
    nodes.sort_by_key(|n| n.doc_order);
    for n in nodes {
        if invisible_by_css(n) {
            continue;
        }
        let Some(rect) = pixel_rect(&n.rect, cfg.viewport) else {
            continue;
        };
        let has_text = !n.text.trim().is_empty();
        let mut kinds = Vec::new();
        if n.pseudo.is_some() {
            if n.has_background {
                kinds.push(CandidateKind::PseudoGraphic);
            }
        } else {
            if n.has_background {
                kinds.push(CandidateKind::Graphic);
            }
            if has_text {
                kinds.push(CandidateKind::Text);
            }
        }
        for kind in kinds {
            out.push(CandidateNode {
                xpath: n.xpath.clone(),
                kind,
                z_index: ZIndex::parse(&n.z_index),
                rect,
                computed_style: n.computed_style.clone(),
                doc_order: out.len() as u32,
            });
        }
    }
    out
}

/// Result of a per-node script call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ack {
    Ok,
    Stale,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TextPaint {
    Color(Bgr),
    Hidden,
    Restore,
}

/// The page manipulations the capture flow needs. Handles are XPaths, with
/// a `::before` / `::after` suffix for pseudo-elements.
pub trait PageOps {
    fn navigate(&mut self, url: &str, timeout: Duration) -> Result<()>;
    /// Installs helpers, freezes animations and starts the mutation sentinel.
    fn prepare(&mut self) -> Result<()>;
    fn collect_metadata(&mut self) -> Result<PageMetadata>;
    fn set_hidden(&mut self, handles: &[String], hidden: bool) -> Result<Vec<Ack>>;
    /// Hides every element except `target`, and hides the target's pseudo-elements.
    fn isolate(&mut self, target: &str) -> Result<Ack>;
    /// Makes the target's own text transparent.
    fn hide_own_text(&mut self, target: &str) -> Result<Ack>;
    /// Sets the root backdrop; `None` restores the original.
    fn set_root_background(&mut self, color: Option<Bgr>) -> Result<()>;
    fn set_text_color(&mut self, handle: &str, paint: TextPaint) -> Result<Ack>;
    /// Restores every inline style recorded in the mapping table.
    fn restore_styles(&mut self) -> Result<()>;
    /// Serialized inline style of every element, keyed by XPath.
    fn inline_styles(&mut self) -> Result<BTreeMap<String, Option<String>>>;
    /// Number of structural DOM mutations observed so far.
    fn mutation_count(&mut self) -> Result<u64>;
    fn screenshot(&mut self, clip: Rect) -> Result<BgrRaster>;
}

fn expect_ok(ack: Ack, handle: &str) -> Result<()> {
    match ack {
        Ack::Ok => Ok(()),
        Ack::Stale => Err(Error::StaleHandle(handle.to_string())),
    }
}

fn check_aligned(shots: &[&BgrRaster], roi: Rect) -> Result<()> {
    for s in shots {
        if s.dimensions() != (roi.w, roi.h) {
            return Err(Error::DimensionMismatch { what: "screenshot group", expected: (roi.w, roi.h), found: s.dimensions() });
        }
    }
    Ok(())
}

/// Runs `attempt` and restores styles afterwards; a DOM mutation during the
/// attempt or a failure triggers one retry, after which the group is discarded.
fn with_retry<P: PageOps + ?Sized, T>(
    page: &mut P,
    xpath: &str,
    mut attempt: impl FnMut(&mut P) -> Result<T>,
) -> Result<T> {
    let mut last_reason = String::new();
    for round in 0..2 {
        let before = page.mutation_count()?;
        let outcome = attempt(page);
        page.set_root_background(None)?;
        page.restore_styles()?;
        let after = page.mutation_count()?;
        match outcome {
            Ok(v) if before == after => return Ok(v),
            Ok(_) => last_reason = "page mutated during capture".into(),
            Err(e @ (Error::Timeout(_) | Error::Protocol(_))) if round == 1 => return Err(e),
            Err(e) => last_reason = e.to_string(),
        }
        log::warn!("capture of {xpath} failed (attempt {}): {last_reason}", round + 1);
    }
    Err(Error::GroupDiscarded { xpath: xpath.to_string(), reason: last_reason })
}

/// Captures a graphic element alone over blue, green and red page backgrounds.
pub fn capture_graphic_group<P: PageOps + ?Sized>(page: &mut P, node: &CandidateNode, id: ElementId) -> Result<GraphicGroup> {
    with_retry(page, &node.xpath, |page| {
        expect_ok(page.isolate(&node.xpath)?, &node.xpath)?;
        if node.kind == CandidateKind::Graphic {
            expect_ok(page.hide_own_text(&node.xpath)?, &node.xpath)?;
        }
        let mut shots = Vec::with_capacity(3);
        for color in [Bgr::BLUE, Bgr::GREEN, Bgr::RED] {
            page.set_root_background(Some(color))?;
            shots.push(page.screenshot(node.rect)?);
        }
        check_aligned(&shots.iter().collect::<Vec<_>>(), node.rect)?;
        let [blue_bg, green_bg, red_bg]: [BgrRaster; 3] = shots.try_into().expect("three shots");
        Ok(GraphicGroup { element_id: id, blue_bg, green_bg, red_bg, roi: node.rect })
    })
}

/// Captures a text element raw, with glyphs hidden and recolored blue, green and red.
pub fn capture_text_group<P: PageOps + ?Sized>(page: &mut P, node: &CandidateNode, id: ElementId) -> Result<TextGroup> {
    with_retry(page, &node.xpath, |page| {
        expect_ok(page.isolate(&node.xpath)?, &node.xpath)?;
        let raw = page.screenshot(node.rect)?;
        let shot = |page: &mut P, paint| -> Result<BgrRaster> {
            expect_ok(page.set_text_color(&node.xpath, paint)?, &node.xpath)?;
            page.screenshot(node.rect)
        };
        let no_fg = shot(page, TextPaint::Hidden)?;
        let blue_fg = shot(page, TextPaint::Color(Bgr::BLUE))?;
        let green_fg = shot(page, TextPaint::Color(Bgr::GREEN))?;
        let red_fg = shot(page, TextPaint::Color(Bgr::RED))?;
        expect_ok(page.set_text_color(&node.xpath, TextPaint::Restore)?, &node.xpath)?;
        check_aligned(&[&raw, &no_fg, &blue_fg, &green_fg, &red_fg], node.rect)?;
        Ok(TextGroup { element_id: id, raw, no_fg, blue_fg, green_fg, red_fg, roi: node.rect })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaptureGroup {
    Graphic(GraphicGroup),
    Text(TextGroup),
}

impl CaptureGroup {
    pub fn roi(&self) -> Rect {
        match self {
            CaptureGroup::Graphic(g) => g.roi,
            CaptureGroup::Text(t) => t.roi,
        }
    }
}

/// Everything captured from one page.
#[derive(Debug, Clone, PartialEq)]
pub struct CapturedPage {
    pub url: String,
    pub viewport: (u32, u32),
    pub page_background: Bgr,
    pub screenshot: BgrRaster,
    pub elements: Vec<(ElementMeta, CaptureGroup)>,
    /// Candidates whose groups were discarded.
    pub discarded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PageOutcome {
    Captured(CapturedPage),
    Dead,
}

/// Parses `rgb(r, g, b)` / `rgba(r, g, b, a)`; transparent or unparsable
/// colors fall back to white, the browser's default canvas.
pub fn parse_css_color(s: &str) -> Bgr {
    let inner = s.trim().strip_prefix("rgba(").or_else(|| s.trim().strip_prefix("rgb(")).and_then(|r| r.strip_suffix(')'));
    let Some(inner) = inner else { return Bgr::WHITE };
    let parts: Vec<f64> = inner.split(',').filter_map(|p| p.trim().parse().ok()).collect();
    match parts.as_slice() {
        [_, _, _, a] if *a == 0.0 => Bgr::WHITE,
        [r, g, b, ..] => Bgr::new(*b, *g, *r),
        _ => Bgr::WHITE,
    }
}

/// Full capture flow for one page. Inline styles are snapshotted first and
/// must match again after the last group.
pub fn capture_page<P: PageOps + ?Sized>(page: &mut P, url: &str, cfg: &CaptureConfig) -> Result<PageOutcome> {
    page.navigate(url, cfg.timeout())?;
    page.prepare()?;
    let meta = page.collect_metadata()?;
    if detect_dead_page(&meta, cfg) {
        log::info!("{url}: dead page, skipped");
        return Ok(PageOutcome::Dead);
    }
    let before = page.inline_styles()?;
    let viewport = Rect::new(0, 0, cfg.viewport.0, cfg.viewport.1);
    let screenshot = page.screenshot(viewport)?;

    let mut candidates = filter_candidate_nodes(&meta, cfg);
    candidates.truncate(cfg.max_elements);
    let mut elements = Vec::new();
    let mut discarded = Vec::new();
    for node in &candidates {
        let id = ElementId(elements.len() as u32);
        let group = match node.kind {
            CandidateKind::Text => capture_text_group(page, node, id).map(CaptureGroup::Text),
            _ => capture_graphic_group(page, node, id).map(CaptureGroup::Graphic),
        };
        match group {
            Ok(g) => {
                let mut meta = node.to_meta(id);
                meta.doc_order = node.doc_order;
                elements.push((meta, g));
            }
            Err(Error::GroupDiscarded { xpath, reason }) => {
                log::warn!("{url}: discarded {xpath}: {reason}");
                discarded.push(xpath);
            }
            Err(e) => return Err(e),
        }
    }

    page.restore_styles()?;
    let after = page.inline_styles()?;
    let changed: Vec<String> = before
        .iter()
        .filter(|(k, v)| after.get(*k) != Some(v))
        .map(|(k, _)| k.clone())
        .collect();
    if !changed.is_empty() {
        return Err(Error::StylesNotRestored(changed));
    }

    Ok(PageOutcome::Captured(CapturedPage {
        url: url.to_string(),
        viewport: cfg.viewport,
        page_background: parse_css_color(&meta.root_background),
        screenshot,
        elements,
        discarded,
    }))
}
