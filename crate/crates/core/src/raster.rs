//! Floating-point rasters, pixel types and integer geometry.
//!
//! All rasters are row-major with the origin at the top-left corner, `x`
//! growing rightward and `y` growing downward. Color channels live in
//! `[0, 255]`, alpha in `[0, 1]`. Quantization to 8 bits only happens at the
//! file boundary (see [`crate::dataset`]).

use serde::{Deserialize, Serialize};

/// A BGR color with channels in `[0, 255]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bgr {
    pub b: f64,
    pub g: f64,
    pub r: f64,
}

impl Bgr {
    pub const BLACK: Bgr = Bgr::new(0.0, 0.0, 0.0);
    pub const WHITE: Bgr = Bgr::new(255.0, 255.0, 255.0);
    pub const BLUE: Bgr = Bgr::new(255.0, 0.0, 0.0);
    pub const GREEN: Bgr = Bgr::new(0.0, 255.0, 0.0);
    pub const RED: Bgr = Bgr::new(0.0, 0.0, 255.0);

    pub const fn new(b: f64, g: f64, r: f64) -> Self {
        Bgr { b, g, r }
    }

    pub fn channels(self) -> [f64; 3] {
        [self.b, self.g, self.r]
    }

    pub fn from_channels(c: [f64; 3]) -> Self {
        Bgr::new(c[0], c[1], c[2])
    }

    pub fn with_alpha(self, a: f64) -> Bgra {
        Bgra::new(self.b, self.g, self.r, a)
    }

    /// Rounds every channel to the nearest 8-bit level.
    pub fn quantized(self) -> Bgr {
        Bgr::from_channels(self.channels().map(quantize_channel))
    }

    pub fn max_abs_diff(self, other: Bgr) -> f64 {
        let (a, b) = (self.channels(), other.channels());
        (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
    }
}

/// A straight (non-premultiplied) BGRA pixel: BGR in `[0, 255]`, alpha in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bgra {
    pub b: f64,
    pub g: f64,
    pub r: f64,
    pub a: f64,
}

impl Bgra {
    pub const TRANSPARENT: Bgra = Bgra::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(b: f64, g: f64, r: f64, a: f64) -> Self {
        Bgra { b, g, r, a }
    }

    pub fn bgr(self) -> Bgr {
        Bgr::new(self.b, self.g, self.r)
    }

    /// Returns the canonical form: fully transparent pixels carry zero color.
    pub fn canonical(self) -> Bgra {
        if self.a == 0.0 {
            Bgra::TRANSPARENT
        } else {
            self
        }
    }
}

pub(crate) fn quantize_channel(v: f64) -> f64 {
    v.clamp(0.0, 255.0).round()
}

/// Converts a `[0, 255]` channel to its nearest byte.
pub fn to_u8(v: f64) -> u8 {
    quantize_channel(v) as u8
}

/// Converts an alpha in `[0, 1]` to its 8-bit representation `round(a * 255)`.
pub fn alpha_to_u8(a: f64) -> u8 {
    (a.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Integer axis-aligned rectangle, half-open: covers `x..x+w` by `y..y+h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: i32, y: i32, w: u32, h: u32) -> Self {
        Rect { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn right(&self) -> i64 {
        self.x as i64 + self.w as i64
    }

    pub fn bottom(&self) -> i64 {
        self.y as i64 + self.h as i64
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x as i64 && y >= self.y as i64 && x < self.right() && y < self.bottom()
    }

    /// Pixel-set intersection. Rectangles that only share an edge coordinate
    /// have no common pixel and yield `None`.
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let x0 = (self.x as i64).max(other.x as i64);
        let y0 = (self.y as i64).max(other.y as i64);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            return None;
        }
        Some(Rect::new(x0 as i32, y0 as i32, (x1 - x0) as u32, (y1 - y0) as u32))
    }

    /// True iff `other` lies entirely inside `self`.
    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x as i64 >= self.x as i64
            && other.y as i64 >= self.y as i64
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }
}

/// A dense row-major raster of pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image<P> {
    width: u32,
    height: u32,
    data: Vec<P>,
}

pub type BgrRaster = Image<Bgr>;
pub type BgraRaster = Image<Bgra>;

impl<P: Copy> Image<P> {
    pub fn filled(width: u32, height: u32, value: P) -> Self {
        Image { width, height, data: vec![value; width as usize * height as usize] }
    }

    /// Builds a raster from row-major pixels. Returns `None` when the length
    /// does not match `width * height`.
    pub fn from_pixels(width: u32, height: u32, data: Vec<P>) -> Option<Self> {
        (data.len() == width as usize * height as usize).then_some(Image { width, height, data })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> P) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[P] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [P] {
        &mut self.data
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> P {
        self.data[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: P) {
        let i = self.index(x, y);
        self.data[i] = value;
    }

    pub fn map<Q: Copy>(&self, f: impl Fn(P) -> Q) -> Image<Q> {
        Image { width: self.width, height: self.height, data: self.data.iter().map(|&p| f(p)).collect() }
    }

    /// Copies the sub-rectangle `rect`, which must lie inside the raster.
    pub fn crop(&self, rect: Rect) -> Option<Image<P>> {
        let bounds = Rect::new(0, 0, self.width, self.height);
        if rect.is_empty() || !bounds.contains_rect(&rect) {
            return None;
        }
        Some(Image::from_fn(rect.w, rect.h, |x, y| {
            self.get(rect.x as u32 + x, rect.y as u32 + y)
        }))
    }
}

impl Image<Bgr> {
    pub fn quantized(&self) -> Image<Bgr> {
        self.map(Bgr::quantized)
    }

    pub fn max_abs_diff(&self, other: &Image<Bgr>) -> Option<f64> {
        if self.dimensions() != other.dimensions() {
            return None;
        }
        Some(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.max_abs_diff(*b))
                .fold(0.0, f64::max),
        )
    }
}

/// A binary raster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: u32, height: u32) -> Self {
        BitMask { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = BitMask::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    /// Like [`BitMask::get`] but treats coordinates outside the raster as unset.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && x < self.width as i64
            && y < self.height as i64
            && self.get(x as u32, y as u32)
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Iterates over the coordinates of set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i as u32) % w, (i as u32) / w))
    }

    pub fn is_subset_of(&self, other: &BitMask) -> bool {
        self.dimensions() == other.dimensions()
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn intersects(&self, other: &BitMask) -> bool {
        self.dimensions() == other.dimensions()
            && self.bits.iter().zip(&other.bits).any(|(&a, &b)| a && b)
    }
}
