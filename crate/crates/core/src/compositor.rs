//! Forward source-over composition and layer-ordered scene rendering.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::layers::Layering;
use crate::model::{ElementId, Scene, SceneElement};
use crate::raster::{BgrRaster, Bgr, Bgra, Image, Rect};

/// Straight-alpha source-over: `a * fg + (1 - a) * bg` per channel.
#[inline]
pub fn composite_over(fg: Bgra, bg: Bgr) -> Bgr {
    let a = fg.a;
    Bgr::new(
        a * fg.b + (1.0 - a) * bg.b,
        a * fg.g + (1.0 - a) * bg.g,
        a * fg.r + (1.0 - a) * bg.r,
    )
}

/// Checks that `layering` lists every scene element exactly once.
pub(crate) fn check_coverage(scene: &Scene, layering: &Layering) -> Result<()> {
    let scene_ids: BTreeSet<ElementId> = scene.ids().collect();
    let mut seen = BTreeSet::new();
    for id in layering.iter_ids() {
        if !scene_ids.contains(&id) {
            return Err(Error::LayeringMismatch(format!("{id} is not in the scene")));
        }
        if !seen.insert(id) {
            return Err(Error::LayeringMismatch(format!("{id} appears in more than one layer")));
        }
    }
    if let Some(missing) = scene_ids.difference(&seen).next() {
        return Err(Error::LayeringMismatch(format!("{missing} is not assigned to a layer")));
    }
    Ok(())
}

/// Options for [`render_mapped`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RenderOptions {
    pub background: Option<Bgr>,
    pub exclude: Option<ElementId>,
    /// Restricts the work to this canvas region; pixels outside keep the background.
    pub clip: Option<Rect>,
}

/// Renders the scene bottom-up in layer order, passing every element pixel
/// through `map` before compositing.
pub fn render_mapped(
    scene: &Scene,
    layering: &Layering,
    opts: RenderOptions,
    map: impl Fn(&SceneElement, Bgra) -> Bgra,
) -> Result<BgrRaster> {
    check_coverage(scene, layering)?;
    if let Some(id) = opts.exclude {
        if scene.element(id).is_none() {
            return Err(Error::UnknownElement(id));
        }
    }
    let by_id: BTreeMap<ElementId, &SceneElement> = scene.elements.iter().map(|e| (e.id(), e)).collect();
    let (cw, ch) = scene.canvas;
    let bg = opts.background.unwrap_or(scene.page_background);
    let mut canvas = Image::filled(cw, ch, bg);
    let region = match opts.clip {
        Some(clip) => match clip.intersect(&scene.canvas_rect()) {
            Some(r) => r,
            None => return Ok(canvas),
        },
        None => scene.canvas_rect(),
    };

    for layer in layering.layers() {
        for id in layer {
            if Some(*id) == opts.exclude {
                continue;
            }
            let el = by_id[id];
            let Some(area) = el.bitmap.extent().intersect(&region) else {
                continue;
            };
            let (ax, ay) = el.bitmap.anchor;
            for y in area.y..area.y + area.h as i32 {
                for x in area.x..area.x + area.w as i32 {
                    let px = el.bitmap.bgra.get((x - ax) as u32, (y - ay) as u32);
                    let px = map(el, px);
                    let under = canvas.get(x as u32, y as u32);
                    canvas.set(x as u32, y as u32, composite_over(px, under));
                }
            }
        }
    }
    Ok(canvas)
}

/// Composites every element over the page background (or `background_override`).
pub fn render_scene(scene: &Scene, layering: &Layering, background_override: Option<Bgr>) -> Result<BgrRaster> {
    render_mapped(
        scene,
        layering,
        RenderOptions { background: background_override, ..Default::default() },
        |_, p| p,
    )
}

/// Like [`render_scene`] but `excluded` contributes nothing.
pub fn render_excluding(
    scene: &Scene,
    layering: &Layering,
    excluded: ElementId,
    background_override: Option<Bgr>,
) -> Result<BgrRaster> {
    render_mapped(
        scene,
        layering,
        RenderOptions { background: background_override, exclude: Some(excluded), clip: None },
        |_, p| p,
    )
}
