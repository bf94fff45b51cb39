//! Seeded synthetic scenes with known ground truth, and simulated capture
//! groups rendered from them.
//!
//! Every scene carries DOM metadata that is consistent with its painting
//! order, so the stacking analysis can recover a layering that reproduces the
//! scene exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::compositor::{composite_over, render_mapped, RenderOptions};
use crate::derive::{GraphicGroup, TextGroup};
use crate::error::{Error, Result};
use crate::layers::{elements_overlap, Layering};
use crate::model::{ElementBitmap, ElementId, ElementMeta, NodeKind, Scene, SceneElement, SceneSource, ZIndex};
use crate::raster::{BgrRaster, Bgr, Bgra, Image, Rect};

/// Smallest nonzero alpha the generator emits.
pub const MIN_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaMode {
    Opaque,
    UniformTranslucent,
    Gradient,
    /// Each element draws one of the other modes.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    Random,
    /// One element per grid cell; nothing overlaps.
    Disjoint,
    /// Every element covers the canvas center.
    Stacked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub seed: u64,
    pub canvas: (u32, u32),
    /// Inclusive range of top-level element counts.
    pub element_count: (usize, usize),
    /// Inclusive range of element side lengths.
    pub size: (u32, u32),
    pub alpha_mode: AlphaMode,
    pub layout: Layout,
    /// Probability that a graphic element is elliptical instead of rectangular.
    pub ellipse_fraction: f64,
    /// Probability that an element is text.
    pub text_fraction: f64,
    /// Probability that an element gets one nested child.
    pub nesting: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 0,
            canvas: (160, 120),
            element_count: (4, 12),
            size: (8, 48),
            alpha_mode: AlphaMode::Mixed,
            layout: Layout::Random,
            ellipse_fraction: 0.25,
            text_fraction: 0.3,
            nesting: 0.2,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        if self.canvas.0 == 0 || self.canvas.1 == 0 {
            return bad("canvas must be at least 1x1");
        }
        if self.element_count.0 > self.element_count.1 {
            return bad("element_count range is empty");
        }
        if self.size.0 == 0 || self.size.0 > self.size.1 {
            return bad("size range must be non-empty and positive");
        }
        if self.size.0 > self.canvas.0.min(self.canvas.1) {
            return bad("minimum element size exceeds the canvas");
        }
        for p in [self.ellipse_fraction, self.text_fraction, self.nesting] {
            if !(0.0..=1.0).contains(&p) {
                return bad("fractions must lie in [0,1]");
            }
        }
        Ok(())
    }
}

/// A synthetic scene with its ground-truth stacking.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub scene: Scene,
    pub layering: Layering,
    /// Painting order, bottom first.
    pub paint_order: Vec<ElementId>,
}

#[derive(Debug, Clone, Copy)]
enum Fill {
    Solid(Bgr),
    Gradient(Bgr, Bgr),
}

/// Extreme colors every sufficiently large scene exercises.
const EXTREMES: [Fill; 6] = [
    Fill::Solid(Bgr::WHITE),
    Fill::Solid(Bgr::BLACK),
    Fill::Gradient(Bgr::BLACK, Bgr::WHITE),
    Fill::Solid(Bgr::BLUE),
    Fill::Solid(Bgr::GREEN),
    Fill::Solid(Bgr::RED),
];

const BACKGROUNDS: [Bgr; 7] = [
    Bgr::WHITE,
    Bgr::WHITE,
    Bgr::BLACK,
    Bgr::new(240.0, 240.0, 240.0),
    Bgr::BLUE,
    Bgr::new(255.0, 255.0, 0.0),
    Bgr::new(32.0, 64.0, 200.0),
];

#[derive(Debug, Clone, Copy)]
enum Shape {
    Rect,
    Ellipse,
    Glyphs,
}

#[derive(Debug, Clone)]
struct Draft {
    rect: Rect,
    kind: NodeKind,
    shape: Shape,
    fill: Fill,
    alpha: (f64, f64),
    xpath: String,
    z: ZIndex,
}

fn random_color(rng: &mut ChaCha8Rng) -> Bgr {
    Bgr::new(
        rng.random_range(0..=255) as f64,
        rng.random_range(0..=255) as f64,
        rng.random_range(0..=255) as f64,
    )
}

fn random_alpha(rng: &mut ChaCha8Rng, mode: AlphaMode) -> (f64, f64) {
    let mode = match mode {
        AlphaMode::Mixed => [AlphaMode::Opaque, AlphaMode::UniformTranslucent, AlphaMode::Gradient][rng.random_range(0..3)],
        m => m,
    };
    match mode {
        AlphaMode::Opaque | AlphaMode::Mixed => (1.0, 1.0),
        AlphaMode::UniformTranslucent => {
            let a = rng.random_range(MIN_ALPHA..0.95);
            (a, a)
        }
        AlphaMode::Gradient => (rng.random_range(MIN_ALPHA..0.5), 1.0),
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

fn render_draft(d: &Draft) -> Image<Bgra> {
    let (w, h) = (d.rect.w, d.rect.h);
    Image::from_fn(w, h, |x, y| {
        let t = if w > 1 { x as f64 / (w - 1) as f64 } else { 1.0 };
        let base_alpha = lerp(d.alpha.0, d.alpha.1, t);
        let coverage = match d.shape {
            Shape::Rect => 1.0,
            Shape::Ellipse => {
                let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
                let (rx, ry) = ((w as f64 / 2.0).max(0.5), (h as f64 / 2.0).max(0.5));
                let v = ((x as f64 - cx) / rx).powi(2) + ((y as f64 - cy) / ry).powi(2);
                if v <= 1.0 { 1.0 } else { 0.0 }
            }
            Shape::Glyphs => {
                // Stems two pixels wide every five columns plus a crossbar,
                // with a half-coverage fringe to the right of each stem.
                let stem = x % 5;
                let bar = h >= 3 && y == h / 2;
                if stem < 2 || bar {
                    1.0
                } else if stem == 2 {
                    0.5
                } else {
                    0.0
                }
            }
        };
        if coverage == 0.0 {
            return Bgra::TRANSPARENT;
        }
        let a = (base_alpha * coverage).max(MIN_ALPHA).min(1.0);
        let c = match d.fill {
            Fill::Solid(c) => c,
            Fill::Gradient(c0, c1) => Bgr::new(lerp(c0.b, c1.b, t), lerp(c0.g, c1.g, t), lerp(c0.r, c1.r, t)),
        };
        c.with_alpha(a)
    })
}

fn place(rng: &mut ChaCha8Rng, p: &SynthParams, index: usize, count: usize) -> Result<Rect> {
    let (cw, ch) = p.canvas;
    let side = |rng: &mut ChaCha8Rng, max: u32| rng.random_range(p.size.0..=p.size.1.min(max).max(p.size.0));
    match p.layout {
        Layout::Random => {
            let w = side(rng, cw).min(cw);
            let h = side(rng, ch).min(ch);
            let x = rng.random_range(0..=cw - w);
            let y = rng.random_range(0..=ch - h);
            Ok(Rect::new(x as i32, y as i32, w, h))
        }
        Layout::Disjoint => {
            let cols = (count as f64).sqrt().ceil().max(1.0) as u32;
            let rows = (count as u32).div_ceil(cols).max(1);
            let (cell_w, cell_h) = (cw / cols, ch / rows);
            if cell_w < p.size.0 + 1 || cell_h < p.size.0 + 1 {
                return Err(Error::InvalidParams("canvas too small for a disjoint layout".into()));
            }
            let w = side(rng, cell_w - 1);
            let h = side(rng, cell_h - 1);
            let (col, row) = (index as u32 % cols, index as u32 / cols);
            let x = col * cell_w + rng.random_range(0..=cell_w - 1 - w);
            let y = row * cell_h + rng.random_range(0..=cell_h - 1 - h);
            Ok(Rect::new(x as i32, y as i32, w, h))
        }
        Layout::Stacked => {
            let (cx, cy) = (cw / 2, ch / 2);
            let w = side(rng, cw).min(cw);
            let h = side(rng, ch).min(ch);
            let x_lo = (cx + 1).saturating_sub(w);
            let y_lo = (cy + 1).saturating_sub(h);
            let x = rng.random_range(x_lo..=cx.min(cw - w));
            let y = rng.random_range(y_lo..=cy.min(ch - h));
            Ok(Rect::new(x as i32, y as i32, w, h))
        }
    }
}

/// Generates a scene, its ground-truth layering and painting order.
/// Identical parameters always give identical output.
pub fn synth_scene(params: &SynthParams) -> Result<Synthesized> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (cw, ch) = params.canvas;
    let count = rng.random_range(params.element_count.0..=params.element_count.1);
    let numeric_z = rng.random_bool(0.5);
    let page_background = BACKGROUNDS[rng.random_range(0..BACKGROUNDS.len())];

    let mut drafts: Vec<Draft> = Vec::new();
    for i in 0..count {
        let rect = place(&mut rng, params, i, count)?;
        let kind = if rng.random_bool(params.text_fraction) { NodeKind::Text } else { NodeKind::Graphic };
        let shape = match kind {
            NodeKind::Text => Shape::Glyphs,
            NodeKind::Graphic if rng.random_bool(params.ellipse_fraction) => Shape::Ellipse,
            NodeKind::Graphic => Shape::Rect,
        };
        let fill = if count >= EXTREMES.len() && i < EXTREMES.len() {
            EXTREMES[i]
        } else if rng.random_bool(0.3) {
            Fill::Gradient(random_color(&mut rng), random_color(&mut rng))
        } else {
            Fill::Solid(random_color(&mut rng))
        };
        let alpha = random_alpha(&mut rng, params.alpha_mode);
        let z = if numeric_z { ZIndex::Numeric(rng.random_range(0..4)) } else { ZIndex::auto() };
        let tag = if kind == NodeKind::Text { "p" } else { "div" };
        let xpath = format!("/html/body/{tag}[{}]", drafts.len() + 1);
        let parent = Draft { rect, kind, shape, fill, alpha, xpath, z };

        let child = if rect.w >= 4 && rect.h >= 4 && rng.random_bool(params.nesting) {
            let w = rng.random_range(2..=rect.w);
            let h = rng.random_range(2..=rect.h);
            let x = rect.x + rng.random_range(0..=rect.w - w) as i32;
            let y = rect.y + rng.random_range(0..=rect.h - h) as i32;
            let kind = if rng.random_bool(0.5) { NodeKind::Text } else { NodeKind::Graphic };
            Some(Draft {
                rect: Rect::new(x, y, w, h),
                kind,
                shape: if kind == NodeKind::Text { Shape::Glyphs } else { Shape::Rect },
                fill: Fill::Solid(random_color(&mut rng)),
                alpha: random_alpha(&mut rng, params.alpha_mode),
                xpath: format!("{}/span[1]", parent.xpath),
                z: parent.z.clone(),
            })
        } else {
            None
        };
        drafts.push(parent);
        drafts.extend(child);
    }
    // Top-level xpaths must count siblings of the same tag only.
    renumber_siblings(&mut drafts);

    let elements: Vec<SceneElement> = drafts
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let id = ElementId(i as u32);
            SceneElement {
                meta: ElementMeta {
                    element_id: id,
                    xpath: d.xpath.clone(),
                    z_index: d.z.clone(),
                    rect: d.rect,
                    kind: d.kind,
                    doc_order: i as u32,
                    computed_style: synth_style(d),
                },
                bitmap: ElementBitmap { element_id: id, bgra: render_draft(d), anchor: (d.rect.x, d.rect.y) },
            }
        })
        .collect();

    let mut paint_order: Vec<usize> = (0..elements.len()).collect();
    paint_order.sort_by_key(|&i| {
        let m = &elements[i].meta;
        (m.z_index.numeric().unwrap_or(0), std::cmp::Reverse(m.rect.area()), m.doc_order)
    });

    // Longest chain of overlapping predecessors in painting order.
    let mut level = vec![0usize; elements.len()];
    for (pos, &i) in paint_order.iter().enumerate() {
        level[i] = 1 + paint_order[..pos]
            .iter()
            .filter(|&&j| elements_overlap(&elements[i], &elements[j]))
            .map(|&j| level[j])
            .max()
            .unwrap_or(0);
    }
    let k = level.iter().copied().max().unwrap_or(0);
    let mut layers = vec![Vec::new(); k];
    for (i, &l) in level.iter().enumerate() {
        layers[l - 1].push(ElementId(i as u32));
    }

    Ok(Synthesized {
        scene: Scene { canvas: (cw, ch), page_background, elements, source: SceneSource::Synthetic },
        layering: Layering::new(layers),
        paint_order: paint_order.into_iter().map(|i| ElementId(i as u32)).collect(),
    })
}

fn renumber_siblings(drafts: &mut [Draft]) {
    let mut counters: std::collections::BTreeMap<String, u32> = Default::default();
    let mut renamed: std::collections::BTreeMap<String, String> = Default::default();
    for d in drafts.iter_mut() {
        let top = d.xpath.split('/').nth(3).unwrap_or_default().to_string();
        let new_top = renamed.entry(top.clone()).or_insert_with(|| {
            let tag = top.split('[').next().unwrap_or("div").to_string();
            let n = counters.entry(tag.clone()).or_insert(0);
            *n += 1;
            format!("{tag}[{n}]")
        });
        d.xpath = d.xpath.replacen(&format!("/html/body/{top}"), &format!("/html/body/{new_top}"), 1);
    }
}

fn synth_style(d: &Draft) -> std::collections::BTreeMap<String, String> {
    let mut s = std::collections::BTreeMap::new();
    let z = match &d.z {
        ZIndex::Numeric(v) => v.to_string(),
        ZIndex::Keyword(k) => k.clone(),
    };
    s.insert("z-index".into(), z);
    s.insert("position".into(), "absolute".into());
    s.insert("width".into(), format!("{}px", d.rect.w));
    s.insert("height".into(), format!("{}px", d.rect.h));
    s
}

/// Layering that paints `order` one element per layer.
pub fn sequential_layering(order: &[ElementId]) -> Layering {
    Layering::new(order.iter().map(|&id| vec![id]).collect())
}

fn element_or_err(scene: &Scene, id: ElementId) -> Result<&SceneElement> {
    scene.element(id).ok_or(Error::UnknownElement(id))
}

fn over_solid(bitmap: &ElementBitmap, bg: Bgr) -> BgrRaster {
    bitmap.bgra.map(|p| composite_over(p, bg))
}

/// Simulates the graphic capture of one element: alone over pure blue,
/// green and red page backgrounds, cropped to its extent.
pub fn simulate_graphic_group(scene: &Scene, id: ElementId, quantize: bool) -> Result<GraphicGroup> {
    let el = element_or_err(scene, id)?;
    let q = |r: BgrRaster| if quantize { r.quantized() } else { r };
    Ok(GraphicGroup {
        element_id: id,
        blue_bg: q(over_solid(&el.bitmap, Bgr::BLUE)),
        green_bg: q(over_solid(&el.bitmap, Bgr::GREEN)),
        red_bg: q(over_solid(&el.bitmap, Bgr::RED)),
        roi: el.bitmap.extent(),
    })
}

/// Simulates the text capture of one element. The backdrop is the page
/// background plus every element painted below it; elements above are hidden.
pub fn simulate_text_group(scene: &Scene, paint_order: &[ElementId], id: ElementId, quantize: bool) -> Result<TextGroup> {
    let el = element_or_err(scene, id)?;
    let pos = paint_order.iter().position(|&p| p == id).ok_or(Error::UnknownElement(id))?;
    let roi = el.bitmap.extent();
    let below: Vec<ElementId> = paint_order[..pos].to_vec();
    let sub = Scene {
        elements: scene.elements.iter().filter(|e| below.contains(&e.id())).cloned().collect(),
        ..scene.clone()
    };
    let backdrop_page = render_mapped(&sub, &sequential_layering(&below), RenderOptions { clip: Some(roi), ..Default::default() }, |_, p| p)?;
    let backdrop = backdrop_page.crop(roi).ok_or_else(|| Error::InvalidParams(format!("{id} lies outside the canvas")))?;
    Ok(text_group_over(id, &el.bitmap, &backdrop, quantize))
}

/// Text captures of `bitmap` over an explicit backdrop raster of the same size.
pub fn text_group_over(id: ElementId, bitmap: &ElementBitmap, backdrop: &BgrRaster, quantize: bool) -> TextGroup {
    let q = |r: BgrRaster| if quantize { r.quantized() } else { r };
    let over = |recolor: Option<Bgr>| {
        Image::from_fn(backdrop.width(), backdrop.height(), |x, y| {
            let p = bitmap.bgra.get(x, y);
            let fg = match recolor {
                Some(c) => c.with_alpha(p.a),
                None => p,
            };
            composite_over(fg, backdrop.get(x, y))
        })
    };
    TextGroup {
        element_id: id,
        raw: q(over(None)),
        no_fg: q(backdrop.clone()),
        blue_fg: q(over(Some(Bgr::BLUE))),
        green_fg: q(over(Some(Bgr::GREEN))),
        red_fg: q(over(Some(Bgr::RED))),
        roi: bitmap.extent(),
    }
}
