//! Visible-area masks, outer contours and bounding boxes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::compositor::{render_mapped, RenderOptions};
use crate::error::{Error, Result};
use crate::layers::Layering;
use crate::model::{ElementId, Scene, ValidationReport};
use crate::raster::{BitMask, Bgr, Bgra};

/// Recolor of the target element when rendering masks.
pub const TARGET_COLOR: Bgr = Bgr::WHITE;
/// Recolor of every other element, also used as the page background.
pub const OTHER_COLOR: Bgr = Bgr::BLACK;

/// How strong a difference must be to count as visible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskThreshold {
    /// Any nonzero float difference.
    #[default]
    Float,
    /// At least one 8-bit level after rounding both renders.
    Quantized,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    pub element_id: ElementId,
    pub bits: BitMask,
}

/// Visible part of `element_id`: the difference between a render with the
/// element (recolored white) and one without it, all others recolored black.
pub fn derive_mask(scene: &Scene, layering: &Layering, element_id: ElementId, threshold: MaskThreshold) -> Result<Mask> {
    let target = scene.element(element_id).ok_or(Error::UnknownElement(element_id))?;
    let clip = target.bitmap.extent();
    let recolor = |el: &crate::model::SceneElement, p: Bgra| {
        if p.a == 0.0 {
            return Bgra::TRANSPARENT;
        }
        let c = if el.id() == element_id { TARGET_COLOR } else { OTHER_COLOR };
        c.with_alpha(p.a)
    };
    let base = RenderOptions { background: Some(OTHER_COLOR), exclude: None, clip: Some(clip) };
    let visible = render_mapped(scene, layering, base, recolor)?;
    let invisible = render_mapped(scene, layering, RenderOptions { exclude: Some(element_id), ..base }, recolor)?;

    let (w, h) = scene.canvas;
    let mut bits = BitMask::new(w, h);
    let Some(region) = clip.intersect(&scene.canvas_rect()) else {
        return Ok(Mask { element_id, bits });
    };
    for y in region.y as u32..region.bottom() as u32 {
        for x in region.x as u32..region.right() as u32 {
            let (v, i) = (visible.get(x, y), invisible.get(x, y));
            let differs = match threshold {
                MaskThreshold::Float => v.max_abs_diff(i) > 0.0,
                MaskThreshold::Quantized => v.quantized().max_abs_diff(i.quantized()) >= 1.0,
            };
            if differs {
                bits.set(x, y, true);
            }
        }
    }
    Ok(Mask { element_id, bits })
}

/// Closed outer boundary of one 8-connected region, clockwise on screen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Contour {
    pub points: Vec<(i32, i32)>,
}

// Clockwise on screen (y down), starting west.
const NEIGHBORS: [(i64, i64); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

fn direction_of(dx: i64, dy: i64) -> usize {
    NEIGHBORS.iter().position(|&d| d == (dx, dy)).expect("neighbor offset")
}

/// Moore-neighbor tracing from `start`, which must be the first pixel of its
/// region in row-major order (so its west neighbor is unset).
fn trace_from(mask: &BitMask, start: (i64, i64)) -> Vec<(i32, i32)> {
    let mut points = vec![(start.0 as i32, start.1 as i32)];
    // Returns the next boundary pixel and the direction we arrived from.
    let step = |p: (i64, i64), backtrack_dir: usize| -> Option<((i64, i64), usize)> {
        for i in 1..=8 {
            let d = (backtrack_dir + i) % 8;
            let (dx, dy) = NEIGHBORS[d];
            let q = (p.0 + dx, p.1 + dy);
            if mask.get_signed(q.0, q.1) {
                let (bx, by) = NEIGHBORS[(d + 7) % 8];
                let b = (p.0 + bx, p.1 + by);
                return Some((q, direction_of(b.0 - q.0, b.1 - q.1)));
            }
        }
        None
    };

    let Some((first, first_back)) = step(start, 0) else {
        return points;
    };
    let (mut p, mut back) = (first, first_back);
    loop {
        let (next, next_back) = step(p, back).expect("traced pixel has a neighbor");
        if p == start && next == first {
            break;
        }
        points.push((p.0 as i32, p.1 as i32));
        p = next;
        back = next_back;
    }
    points
}

/// One outer contour per 8-connected region, ordered by each region's
/// topmost-then-leftmost pixel, which is also the contour's first point.
pub fn trace_contours(mask: &Mask) -> Vec<Contour> {
    let bits = &mask.bits;
    let (w, h) = bits.dimensions();
    let mut labeled = BitMask::new(w, h);
    let mut contours = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !bits.get(x, y) || labeled.get(x, y) {
                continue;
            }
            let mut queue = VecDeque::from([(x, y)]);
            labeled.set(x, y, true);
            while let Some((cx, cy)) = queue.pop_front() {
                for (dx, dy) in NEIGHBORS {
                    let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                    if bits.get_signed(nx, ny) && !labeled.get(nx as u32, ny as u32) {
                        labeled.set(nx as u32, ny as u32, true);
                        queue.push_back((nx as u32, ny as u32));
                    }
                }
            }
            contours.push(Contour { points: trace_from(bits, (x as i64, y as i64)) });
        }
    }
    contours
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BBox {
    Empty,
    Rect { x: u32, y: u32, w: u32, h: u32 },
}

impl BBox {
    /// `[x, y, w, h]`, or `None` when empty.
    pub fn xywh(&self) -> Option<[u32; 4]> {
        match *self {
            BBox::Empty => None,
            BBox::Rect { x, y, w, h } => Some([x, y, w, h]),
        }
    }
}

/// Axis-aligned minimum enclosing rectangle of the set pixels.
pub fn min_bbox(mask: &Mask) -> BBox {
    let mut it = mask.bits.iter_set();
    let Some((x0, y0)) = it.next() else {
        return BBox::Empty;
    };
    let (mut min_x, mut max_x, mut max_y) = (x0, x0, y0);
    for (x, y) in it {
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    BBox::Rect { x: min_x, y: y0, w: max_x - min_x + 1, h: max_y - y0 + 1 }
}

/// True iff every edge row and column of `bbox` holds a set pixel and no set
/// pixel lies outside it.
pub fn bbox_is_tight(mask: &BitMask, bbox: &BBox) -> bool {
    let (w, h) = mask.dimensions();
    match *bbox {
        BBox::Empty => mask.is_empty(),
        BBox::Rect { x, y, w: bw, h: bh } => {
            if bw == 0 || bh == 0 || x + bw > w || y + bh > h {
                return false;
            }
            let (x1, y1) = (x + bw - 1, y + bh - 1);
            let inside = mask.iter_set().all(|(px, py)| px >= x && px <= x1 && py >= y && py <= y1);
            inside
                && (x..=x1).any(|c| mask.get(c, y))
                && (x..=x1).any(|c| mask.get(c, y1))
                && (y..=y1).any(|r| mask.get(x, r))
                && (y..=y1).any(|r| mask.get(x1, r))
        }
    }
}

/// Checks the contour invariants against its mask: every point is a set
/// pixel with an unset 4-neighbor (outside the canvas counts as unset),
/// consecutive points are 8-adjacent and the loop closes.
pub fn check_contour(mask: &BitMask, contour: &Contour, element: ElementId) -> ValidationReport {
    let mut report = ValidationReport::default();
    if contour.points.is_empty() {
        report.push("contour", Some(element), "empty contour");
        return report;
    }
    for &(x, y) in &contour.points {
        let (x, y) = (x as i64, y as i64);
        if !mask.get_signed(x, y) {
            report.push("contour", Some(element), format!("point ({x},{y}) is not a mask pixel"));
        } else if [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().all(|(dx, dy)| mask.get_signed(x + dx, y + dy)) {
            report.push("contour", Some(element), format!("point ({x},{y}) is interior"));
        }
    }
    let n = contour.points.len();
    for i in 0..n {
        let (a, b) = (contour.points[i], contour.points[(i + 1) % n]);
        let (dx, dy) = ((a.0 - b.0).abs(), (a.1 - b.1).abs());
        if n > 1 && (dx > 1 || dy > 1 || (dx == 0 && dy == 0)) {
            report.push("contour", Some(element), format!("points {a:?} and {b:?} are not 8-adjacent"));
        }
    }
    report
}

/// All annotations of one element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementAnnotation {
    pub mask: Mask,
    pub contours: Vec<Contour>,
    pub bbox: BBox,
}

impl ElementAnnotation {
    pub fn element_id(&self) -> ElementId {
        self.mask.element_id
    }

    pub fn visible(&self) -> bool {
        !self.mask.bits.is_empty()
    }

    pub fn from_mask(mask: Mask) -> Self {
        let contours = trace_contours(&mask);
        let bbox = min_bbox(&mask);
        ElementAnnotation { mask, contours, bbox }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub elements: Vec<ElementAnnotation>,
}

impl AnnotationSet {
    pub fn get(&self, id: ElementId) -> Option<&ElementAnnotation> {
        self.elements.iter().find(|a| a.element_id() == id)
    }
}

/// Annotates every scene element in scene order.
pub fn annotate_scene(scene: &Scene, layering: &Layering, threshold: MaskThreshold) -> Result<AnnotationSet> {
    let elements = scene
        .ids()
        .map(|id| derive_mask(scene, layering, id, threshold).map(ElementAnnotation::from_mask))
        .collect::<Result<_>>()?;
    Ok(AnnotationSet { elements })
}
