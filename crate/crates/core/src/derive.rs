//! Recovery of per-element BGRA bitmaps from chroma-key screenshot groups.
//!
//! Graphic elements are captured alone over a pure blue, green and red page
//! background. Text elements keep their own backdrop and are captured raw,
//! with the glyphs hidden, and with the glyphs recolored pure blue, green and
//! red. In both cases source-over composition is inverted per pixel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ElementBitmap, ElementId};
use crate::raster::{BgrRaster, BitMask, Bgr, Bgra, Image, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DerivationConfig {
    /// Lower bound on every division denominator.
    pub epsilon: f64,
    /// Per-channel distance from 255 still counted as white backdrop.
    pub white_tolerance: u8,
    /// Alphas below this are treated as fully transparent.
    pub alpha_support_threshold: f64,
}

impl Default for DerivationConfig {
    fn default() -> Self {
        DerivationConfig { epsilon: 1e-6, white_tolerance: 0, alpha_support_threshold: 1.0 / 255.0 }
    }
}

impl DerivationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(0.0..=1.0).contains(&self.alpha_support_threshold) {
            return Err(Error::Config("alpha_support_threshold must be in [0,1]".into()));
        }
        Ok(())
    }
}

/// Screenshots of an isolated element over the three pure page backgrounds,
/// cropped to `roi`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphicGroup {
    pub element_id: ElementId,
    pub blue_bg: BgrRaster,
    pub green_bg: BgrRaster,
    pub red_bg: BgrRaster,
    pub roi: Rect,
}

/// Screenshots of a text element over its own backdrop, cropped to `roi`.
#[derive(Debug, Clone, PartialEq)]
pub struct TextGroup {
    pub element_id: ElementId,
    pub raw: BgrRaster,
    /// Glyphs hidden: the backdrop alone.
    pub no_fg: BgrRaster,
    pub blue_fg: BgrRaster,
    pub green_fg: BgrRaster,
    pub red_fg: BgrRaster,
    pub roi: Rect,
}

/// Pixels whose text backdrop is pure white.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WhiteMask(pub BitMask);

fn check_dims(roi: Rect, rasters: &[(&'static str, &BgrRaster)]) -> Result<()> {
    let expected = (roi.w, roi.h);
    for (what, r) in rasters {
        if r.dimensions() != expected {
            return Err(Error::DimensionMismatch { what, expected, found: r.dimensions() });
        }
    }
    Ok(())
}

#[inline]
fn safe_div(num: f64, den: f64, eps: f64) -> f64 {
    num / den.max(eps)
}

fn finish(alpha: f64, bgr: [f64; 3], cfg: &DerivationConfig) -> Bgra {
    let a = alpha.clamp(0.0, 1.0);
    if a.is_nan() || a < cfg.alpha_support_threshold || a == 0.0 {
        return Bgra::TRANSPARENT;
    }
    let c = bgr.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 255.0) });
    Bgra::new(c[0], c[1], c[2], a)
}

/// Recovers one graphic pixel from its appearance over blue, green and red.
pub fn derive_graphic_pixel(blue: Bgr, green: Bgr, red: Bgr, cfg: &DerivationConfig) -> Bgra {
    let spread = (blue.b - red.b).abs()
        + (blue.b - green.b).abs()
        + (green.g - blue.g).abs()
        + (green.g - red.g).abs()
        + (red.r - green.r).abs()
        + (red.r - blue.r).abs();
    let alpha = (1.0 - spread / (6.0 * 255.0)).clamp(0.0, 1.0);
    let leak = (1.0 - alpha) * 255.0;
    let bgr = [
        safe_div(blue.b - leak, alpha, cfg.epsilon),
        safe_div(green.g - leak, alpha, cfg.epsilon),
        safe_div(red.r - leak, alpha, cfg.epsilon),
    ];
    finish(alpha, bgr, cfg)
}

pub fn derive_graphic(group: &GraphicGroup, cfg: &DerivationConfig) -> Result<ElementBitmap> {
    check_dims(
        group.roi,
        &[("blue_bg", &group.blue_bg), ("green_bg", &group.green_bg), ("red_bg", &group.red_bg)],
    )?;
    let bgra = Image::from_fn(group.roi.w, group.roi.h, |x, y| {
        derive_graphic_pixel(group.blue_bg.get(x, y), group.green_bg.get(x, y), group.red_bg.get(x, y), cfg)
    });
    Ok(ElementBitmap { element_id: group.element_id, bgra, anchor: (group.roi.x, group.roi.y) })
}

#[inline]
fn is_white(p: Bgr, tolerance: u8) -> bool {
    let floor = 255.0 - tolerance as f64;
    p.b >= floor && p.g >= floor && p.r >= floor
}

pub fn compute_white_mask(no_fg: &BgrRaster, cfg: &DerivationConfig) -> WhiteMask {
    WhiteMask(BitMask::from_fn(no_fg.width(), no_fg.height(), |x, y| {
        is_white(no_fg.get(x, y), cfg.white_tolerance)
    }))
}

/// Per-channel alphas from the recolored captures over a non-white backdrop,
/// each clamped to `[0, 1]`.
pub fn text_channel_alphas(backdrop: Bgr, blue: Bgr, green: Bgr, red: Bgr, cfg: &DerivationConfig) -> [f64; 3] {
    [
        safe_div(blue.b - backdrop.b, 255.0 - backdrop.b, cfg.epsilon),
        safe_div(green.g - backdrop.g, 255.0 - backdrop.g, cfg.epsilon),
        safe_div(red.r - backdrop.r, 255.0 - backdrop.r, cfg.epsilon),
    ]
    .map(|a| if a.is_nan() { 0.0 } else { a.clamp(0.0, 1.0) })
}

/// Alpha over a pure-white backdrop: mean coverage of the six cross channels
/// that the recolored glyph darkens.
pub fn text_white_alpha(blue: Bgr, green: Bgr, red: Bgr) -> f64 {
    let dark = |v: f64| (255.0 - v) / 255.0;
    (dark(blue.g) + dark(blue.r) + dark(green.b) + dark(green.r) + dark(red.b) + dark(red.g)) / 6.0
}

/// Recovers one text pixel.
pub fn derive_text_pixel(
    raw: Bgr,
    backdrop: Bgr,
    blue: Bgr,
    green: Bgr,
    red: Bgr,
    white: bool,
    cfg: &DerivationConfig,
) -> Bgra {
    let alpha = if white {
        text_white_alpha(blue, green, red)
    } else {
        text_channel_alphas(backdrop, blue, green, red, cfg).into_iter().fold(0.0, f64::max)
    };
    let a = alpha.clamp(0.0, 1.0);
    let bgr = [
        safe_div(raw.b - (1.0 - a) * backdrop.b, a, cfg.epsilon),
        safe_div(raw.g - (1.0 - a) * backdrop.g, a, cfg.epsilon),
        safe_div(raw.r - (1.0 - a) * backdrop.r, a, cfg.epsilon),
    ];
    finish(a, bgr, cfg)
}

pub fn derive_text(group: &TextGroup, cfg: &DerivationConfig) -> Result<ElementBitmap> {
    check_dims(
        group.roi,
        &[
            ("raw", &group.raw),
            ("no_fg", &group.no_fg),
            ("blue_fg", &group.blue_fg),
            ("green_fg", &group.green_fg),
            ("red_fg", &group.red_fg),
        ],
    )?;
    let WhiteMask(white) = compute_white_mask(&group.no_fg, cfg);
    let bgra = Image::from_fn(group.roi.w, group.roi.h, |x, y| {
        derive_text_pixel(
            group.raw.get(x, y),
            group.no_fg.get(x, y),
            group.blue_fg.get(x, y),
            group.green_fg.get(x, y),
            group.red_fg.get(x, y),
            white.get(x, y),
            cfg,
        )
    });
    Ok(ElementBitmap { element_id: group.element_id, bgra, anchor: (group.roi.x, group.roi.y) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compositor::composite_over;

    const CFG: DerivationConfig =
        DerivationConfig { epsilon: 1e-6, white_tolerance: 0, alpha_support_threshold: 1.0 / 255.0 };

    fn assert_close(got: Bgra, want: Bgra, tol: f64) {
        let d = [got.b - want.b, got.g - want.g, got.r - want.r, got.a - want.a];
        assert!(d.iter().all(|v| v.abs() <= tol), "got {got:?}, want {want:?}");
    }

    fn one(p: Bgr) -> BgrRaster {
        Image::filled(1, 1, p)
    }

    #[test]
    fn opaque_pixel_is_background_invariant() {
        let p = Bgr::new(100.0, 150.0, 200.0);
        assert_eq!(derive_graphic_pixel(p, p, p, &CFG), Bgra::new(100.0, 150.0, 200.0, 1.0));
    }

    #[test]
    fn pure_background_pixel_is_transparent() {
        assert_eq!(derive_graphic_pixel(Bgr::BLUE, Bgr::GREEN, Bgr::RED, &CFG), Bgra::TRANSPARENT);
    }

    #[test]
    fn half_transparent_graphic_round_trips() {
        let fg = Bgra::new(100.0, 150.0, 200.0, 0.5);
        let (b, g, r) = (composite_over(fg, Bgr::BLUE), composite_over(fg, Bgr::GREEN), composite_over(fg, Bgr::RED));
        assert_eq!(b, Bgr::new(177.5, 75.0, 100.0));
        assert_eq!(g, Bgr::new(50.0, 202.5, 100.0));
        assert_eq!(r, Bgr::new(50.0, 75.0, 227.5));
        assert_close(derive_graphic_pixel(b, g, r, &CFG), fg, 1e-9);
    }

    #[test]
    fn graphic_group_dimension_mismatch() {
        let group = GraphicGroup {
            element_id: ElementId(0),
            blue_bg: Image::filled(2, 2, Bgr::BLUE),
            green_bg: Image::filled(2, 2, Bgr::GREEN),
            red_bg: Image::filled(3, 2, Bgr::RED),
            roi: Rect::new(4, 5, 2, 2),
        };
        assert!(matches!(
            derive_graphic(&group, &CFG),
            Err(Error::DimensionMismatch { what: "red_bg", .. })
        ));
    }

    #[test]
    fn graphic_bitmap_is_anchored_at_roi() {
        let group = GraphicGroup {
            element_id: ElementId(7),
            blue_bg: one(Bgr::BLACK),
            green_bg: one(Bgr::BLACK),
            red_bg: one(Bgr::BLACK),
            roi: Rect::new(4, 5, 1, 1),
        };
        let bm = derive_graphic(&group, &CFG).unwrap();
        assert_eq!(bm.anchor, (4, 5));
        assert_eq!(bm.element_id, ElementId(7));
        assert_eq!(bm.bgra.get(0, 0), Bgra::new(0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn white_mask_threshold() {
        let all_white = Image::filled(3, 3, Bgr::WHITE);
        assert_eq!(compute_white_mask(&all_white, &CFG).0.count(), 9);
        let all_black = Image::filled(3, 3, Bgr::BLACK);
        assert!(compute_white_mask(&all_black, &CFG).0.is_empty());
        let almost = one(Bgr::new(255.0, 255.0, 254.0));
        assert!(compute_white_mask(&almost, &CFG).0.is_empty());
        let loose = DerivationConfig { white_tolerance: 1, ..CFG };
        assert_eq!(compute_white_mask(&almost, &loose).0.count(), 1);
    }

    #[test]
    fn opaque_black_text_on_white() {
        let p = derive_text_pixel(Bgr::BLACK, Bgr::WHITE, Bgr::BLUE, Bgr::GREEN, Bgr::RED, true, &CFG);
        assert_eq!(p, Bgra::new(0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn half_white_text_on_black() {
        let group = TextGroup {
            element_id: ElementId(0),
            raw: one(Bgr::new(127.5, 127.5, 127.5)),
            no_fg: one(Bgr::BLACK),
            blue_fg: one(Bgr::new(127.5, 0.0, 0.0)),
            green_fg: one(Bgr::new(0.0, 127.5, 0.0)),
            red_fg: one(Bgr::new(0.0, 0.0, 127.5)),
            roi: Rect::new(0, 0, 1, 1),
        };
        let bm = derive_text(&group, &CFG).unwrap();
        assert_close(bm.bgra.get(0, 0), Bgra::new(255.0, 255.0, 255.0, 0.5), 1e-9);
    }

    #[test]
    fn untouched_text_pixel_is_transparent() {
        let bg = Bgr::new(30.0, 60.0, 90.0);
        assert_eq!(derive_text_pixel(bg, bg, bg, bg, bg, false, &CFG), Bgra::TRANSPARENT);
    }

    #[test]
    fn single_channel_white_backdrop_uses_other_channels() {
        let fg = Bgra::new(20.0, 40.0, 60.0, 0.7);
        let bg = Bgr::new(255.0, 10.0, 100.0);
        let recolor = |c: Bgr| composite_over(c.with_alpha(fg.a), bg);
        let p = derive_text_pixel(
            composite_over(fg, bg),
            bg,
            recolor(Bgr::BLUE),
            recolor(Bgr::GREEN),
            recolor(Bgr::RED),
            false,
            &CFG,
        );
        assert_close(p, fg, 1e-9);
    }

    #[test]
    fn identical_graphic_screenshots_give_full_alpha() {
        let p = Bgr::new(1.0, 254.0, 33.0);
        assert_eq!(derive_graphic_pixel(p, p, p, &CFG).a, 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(CFG.validate().is_ok());
        assert!(DerivationConfig { epsilon: 0.0, ..CFG }.validate().is_err());
    }
}
