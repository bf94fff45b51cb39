//! PNG encoding of rasters and masks. Channels are written in RGB(A) order,
//! as every image tool expects; values are rounded to 8 bits.

use std::io::Cursor;

use png::{BitDepth, ColorType, Transformations};

use crate::raster::{alpha_to_u8, to_u8, Bgr, BgrRaster, Bgra, BgraRaster, BitMask, Image};

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedPng {
    pub width: u32,
    pub height: u32,
    pub color: ColorType,
    /// 8-bit samples after expansion, `color.samples()` per pixel.
    pub data: Vec<u8>,
}

fn encode(width: u32, height: u32, color: ColorType, depth: BitDepth, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(color);
        enc.set_depth(depth);
        let mut w = enc.write_header().expect("in-memory png header");
        w.write_image_data(data).expect("in-memory png data");
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<DecodedPng, String> {
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(Transformations::EXPAND | Transformations::STRIP_16);
    let mut reader = dec.read_info().map_err(|e| e.to_string())?;
    let size = reader.output_buffer_size().ok_or("image too large")?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| e.to_string())?;
    buf.truncate(info.buffer_size());
    Ok(DecodedPng { width: info.width, height: info.height, color: info.color_type, data: buf })
}

pub fn encode_bgr(img: &BgrRaster) -> Vec<u8> {
    let data: Vec<u8> = img.pixels().iter().flat_map(|p| [to_u8(p.r), to_u8(p.g), to_u8(p.b)]).collect();
    encode(img.width(), img.height(), ColorType::Rgb, BitDepth::Eight, &data)
}

pub fn encode_bgra(img: &BgraRaster) -> Vec<u8> {
    let data: Vec<u8> = img
        .pixels()
        .iter()
        .flat_map(|p| [to_u8(p.r), to_u8(p.g), to_u8(p.b), alpha_to_u8(p.a)])
        .collect();
    encode(img.width(), img.height(), ColorType::Rgba, BitDepth::Eight, &data)
}

/// 1-bit grayscale image, set pixels white.
pub fn encode_mask(mask: &BitMask) -> Vec<u8> {
    let (w, h) = mask.dimensions();
    let stride = (w as usize).div_ceil(8);
    let mut data = vec![0u8; stride * h as usize];
    for (x, y) in mask.iter_set() {
        data[y as usize * stride + x as usize / 8] |= 0x80 >> (x % 8);
    }
    encode(w, h, ColorType::Grayscale, BitDepth::One, &data)
}

/// Decodes any 8/16-bit PNG into an opaque BGR raster; alpha is ignored.
pub fn decode_bgr(bytes: &[u8]) -> Result<BgrRaster, String> {
    let d = decode(bytes)?;
    let n = d.color.samples();
    let px = |c: &[u8]| match n {
        1 | 2 => Bgr::new(c[0] as f64, c[0] as f64, c[0] as f64),
        _ => Bgr::new(c[2] as f64, c[1] as f64, c[0] as f64),
    };
    let pixels = d.data.chunks_exact(n).map(px).collect();
    Image::from_pixels(d.width, d.height, pixels).ok_or_else(|| "pixel count mismatch".to_string())
}

pub fn decode_bgra(bytes: &[u8]) -> Result<BgraRaster, String> {
    let d = decode(bytes)?;
    if d.color != ColorType::Rgba {
        return Err(format!("expected RGBA, found {:?}", d.color));
    }
    let pixels = d
        .data
        .chunks_exact(4)
        .map(|c| Bgra::new(c[2] as f64, c[1] as f64, c[0] as f64, c[3] as f64 / 255.0).canonical())
        .collect();
    Image::from_pixels(d.width, d.height, pixels).ok_or_else(|| "pixel count mismatch".to_string())
}

pub fn decode_mask(bytes: &[u8]) -> Result<BitMask, String> {
    let d = decode(bytes)?;
    if d.color != ColorType::Grayscale {
        return Err(format!("expected grayscale, found {:?}", d.color));
    }
    let mut mask = BitMask::new(d.width, d.height);
    for (i, v) in d.data.iter().enumerate() {
        match v {
            0 => {}
            255 => mask.set(i as u32 % d.width, i as u32 / d.width, true),
            other => return Err(format!("mask value {other} is neither 0 nor 255")),
        }
    }
    Ok(mask)
}
