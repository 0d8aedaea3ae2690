//! The editing operations. All arithmetic is integer-only so results are
//! bit-identical on every platform.

use std::fmt;
use std::str::FromStr;

use super::font::{Font, GLYPH_HEIGHT, GLYPH_WIDTH};
use super::{ImageFormat, Pixel, RasterImage, Region};
use crate::error::{Error, Result};

/// Horizontal advance of one glyph cell at scale 1 (glyph plus 1px gap).
pub const GLYPH_ADVANCE: u32 = GLYPH_WIDTH + 1;
/// Vertical extent of one glyph cell at scale 1.
pub const GLYPH_CELL_HEIGHT: u32 = GLYPH_HEIGHT + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Left/right.
    Mirror,
    /// Top/bottom.
    Flip,
    /// `(x, y) -> (y, x)`.
    Transpose,
}

pub fn reorient(img: &RasterImage, mode: Orientation) -> RasterImage {
    let (w, h) = img.dims();
    let src = img.pixels();
    let (ow, oh) = match mode {
        Orientation::Transpose => (h, w),
        _ => (w, h),
    };
    let pixels = (0..oh)
        .flat_map(|y| (0..ow).map(move |x| (x, y)))
        .map(|(x, y)| {
            let (sx, sy) = match mode {
                Orientation::Mirror => (w - 1 - x, y),
                Orientation::Flip => (x, h - 1 - y),
                Orientation::Transpose => (y, x),
            };
            src[sy as usize * w as usize + sx as usize]
        })
        .collect();
    RasterImage::from_pixels(ow, oh, pixels).expect("dimensions preserved")
}

/// Nearest-neighbor resampling: output `(x, y)` copies input
/// `(x * W / new_w, y * H / new_h)`.
pub fn scale(img: &RasterImage, new_w: u32, new_h: u32) -> Result<RasterImage> {
    if new_w == 0 || new_h == 0 {
        return Err(Error::param(format!(
            "scale target must be at least 1x1, got {new_w}x{new_h}"
        )));
    }
    let (w, h) = (img.width() as u64, img.height() as u64);
    RasterImage::from_fn(new_w, new_h, |x, y| {
        let sx = x as u64 * w / new_w as u64;
        let sy = y as u64 * h / new_h as u64;
        img.get(sx as u32, sy as u32)
    })
}

pub fn invert(img: &RasterImage) -> RasterImage {
    img.map_pixels(|p| p.map_rgb(|c| 255 - c))
}

/// Nonnegative brightness multiplier with three fractional digits, stored in
/// thousandths so it serializes exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Factor(u32);

impl Factor {
    pub const ONE: Factor = Factor(1000);

    pub const fn from_milli(milli: u32) -> Self {
        Factor(milli)
    }

    pub const fn milli(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param(format!("brightness factor {s:?} must be a nonnegative decimal with at most 3 fraction digits"));
        if s.starts_with('-') {
            return Err(Error::param(format!("brightness factor {s} is negative")));
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() || frac.len() > 3 || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u32 = int.parse().map_err(|_| bad())?;
        let frac: u32 = format!("{frac:0<3}").parse().map_err(|_| bad())?;
        int.checked_mul(1000)
            .and_then(|v| v.checked_add(frac))
            .map(Factor)
            .ok_or_else(bad)
    }
}

/// `(num / den)` rounded half up; both operands nonnegative.
#[inline]
fn div_round_half_up(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}

#[inline]
fn clamp_u8(v: u64) -> u8 {
    v.min(255) as u8
}

pub fn brightness(img: &RasterImage, factor: Factor) -> RasterImage {
    let m = factor.milli() as u64;
    img.map_pixels(|p| p.map_rgb(|c| clamp_u8(div_round_half_up(c as u64 * m, 1000))))
}

/// Rec. 601 luma in thousandths.
const LUMA: [u64; 3] = [299, 587, 114];

pub fn grayscale(img: &RasterImage) -> RasterImage {
    img.map_pixels(|p| {
        let l = clamp_u8(weighted(LUMA, p));
        Pixel::rgba(l, l, l, p.a)
    })
}

const SEPIA: [[u64; 3]; 3] = [[393, 769, 189], [349, 686, 168], [272, 534, 131]];

pub fn sepia(img: &RasterImage) -> RasterImage {
    img.map_pixels(|p| {
        Pixel::rgba(
            clamp_u8(weighted(SEPIA[0], p)),
            clamp_u8(weighted(SEPIA[1], p)),
            clamp_u8(weighted(SEPIA[2], p)),
            p.a,
        )
    })
}

#[inline]
fn weighted(weights: [u64; 3], p: &Pixel) -> u64 {
    let sum = weights[0] * p.r as u64 + weights[1] * p.g as u64 + weights[2] * p.b as u64;
    div_round_half_up(sum, 1000)
}

pub fn solarize(img: &RasterImage, threshold: u16) -> Result<RasterImage> {
    if threshold > 256 {
        return Err(Error::param(format!("solarize threshold {threshold} outside 0..=256")));
    }
    Ok(img.map_pixels(|p| p.map_rgb(|c| if c as u16 >= threshold { 255 - c } else { c })))
}

pub fn posterize(img: &RasterImage, bits: u8) -> Result<RasterImage> {
    if !(1..=8).contains(&bits) {
        return Err(Error::param(format!("posterize bits {bits} outside 1..=8")));
    }
    let mask = (256u16 - (1u16 << (8 - bits))) as u8;
    Ok(img.map_pixels(|p| p.map_rgb(|c| c & mask)))
}

/// Per-channel CDF histogram equalization. A channel whose values are all
/// equal is left as is.
pub fn equalize_histogram(img: &RasterImage) -> RasterImage {
    let n = img.pixels().len() as u64;
    let lut = |channel: fn(&Pixel) -> u8| -> [u8; 256] {
        let mut hist = [0u64; 256];
        for p in img.pixels() {
            hist[channel(p) as usize] += 1;
        }
        let mut cdf = [0u64; 256];
        let mut acc = 0;
        for (c, count) in hist.iter().enumerate() {
            acc += count;
            cdf[c] = acc;
        }
        let cdf_min = cdf.iter().copied().find(|&v| v > 0).unwrap_or(n);
        let mut table = [0u8; 256];
        for (c, slot) in table.iter_mut().enumerate() {
            *slot = if cdf_min == n {
                c as u8
            } else {
                let num = cdf[c].saturating_sub(cdf_min) * 255;
                clamp_u8(div_round_half_up(num, n - cdf_min))
            };
        }
        table
    };
    let (lr, lg, lb) = (lut(|p| p.r), lut(|p| p.g), lut(|p| p.b));
    img.map_pixels(|p| Pixel::rgba(lr[p.r as usize], lg[p.g as usize], lb[p.b as usize], p.a))
}

pub fn crop(img: &RasterImage, region: Region) -> Result<RasterImage> {
    if !region.fits_within(img.width(), img.height()) {
        return Err(Error::param(format!(
            "crop region {}x{}+{}+{} escapes the {}x{} image",
            region.w,
            region.h,
            region.x0,
            region.y0,
            img.width(),
            img.height()
        )));
    }
    RasterImage::from_fn(region.w, region.h, |x, y| img.get(region.x0 + x, region.y0 + y))
}

/// Integer pixel coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl Point {
    pub const fn new(x: u32, y: u32) -> Self {
        Point { x, y }
    }
}

/// Whether pixel `p` lies strictly closer than `radius` to segment `a-b`.
/// Evaluated exactly in integers: with `d = b - a`, `v = p - a`, the squared
/// distance to the interior of the segment is `|v|^2 - (v.d)^2 / |d|^2`.
fn within_segment(p: (i64, i64), a: Point, b: Point, radius: u32) -> bool {
    let r2 = radius as i64 * radius as i64;
    let (ax, ay) = (a.x as i64, a.y as i64);
    let (dx, dy) = (b.x as i64 - ax, b.y as i64 - ay);
    let (vx, vy) = (p.0 - ax, p.1 - ay);
    let dd = dx * dx + dy * dy;
    let vd = vx * dx + vy * dy;
    let vv = vx * vx + vy * vy;
    if dd == 0 || vd <= 0 {
        return vv < r2;
    }
    if vd >= dd {
        let (wx, wy) = (p.0 - b.x as i64, p.1 - b.y as i64);
        return wx * wx + wy * wy < r2;
    }
    (vv as i128) * (dd as i128) - (vd as i128) * (vd as i128) < (r2 as i128) * (dd as i128)
}

/// Bounding box of the stroke dilated by `radius`, clipped to the image.
pub fn brush_footprint(points: &[Point], radius: u32, width: u32, height: u32) -> Option<Region> {
    let r = radius as i64;
    let min_x = points.iter().map(|p| p.x as i64).min()?;
    let max_x = points.iter().map(|p| p.x as i64).max()?;
    let min_y = points.iter().map(|p| p.y as i64).min()?;
    let max_y = points.iter().map(|p| p.y as i64).max()?;
    Region::clipped(min_x - r, min_y - r, max_x + r + 1, max_y + r + 1, width, height)
}

pub(crate) fn validate_brush(points: &[Point], radius: u32, width: u32, height: u32) -> Result<()> {
    if points.is_empty() {
        return Err(Error::param("brush stroke needs at least one point"));
    }
    if radius == 0 {
        return Err(Error::param("brush radius must be at least 1"));
    }
    if let Some(p) = points.iter().find(|p| p.x >= width || p.y >= height) {
        return Err(Error::param(format!(
            "brush point ({}, {}) outside the {width}x{height} image",
            p.x, p.y
        )));
    }
    Ok(())
}

/// Paints a hard-edged stroke: every pixel closer than `radius` to any
/// segment of the polyline takes `color`.
pub fn brush(img: &RasterImage, points: &[Point], radius: u32, color: Pixel) -> Result<RasterImage> {
    validate_brush(points, radius, img.width(), img.height())?;
    let mut out = img.clone();
    let Some(area) = brush_footprint(points, radius, img.width(), img.height()) else {
        return Ok(out);
    };
    let segments: Vec<(Point, Point)> = if points.len() == 1 {
        vec![(points[0], points[0])]
    } else {
        points.windows(2).map(|w| (w[0], w[1])).collect()
    };
    for y in area.y0..area.y0 + area.h {
        for x in area.x0..area.x0 + area.w {
            let p = (x as i64, y as i64);
            if segments.iter().any(|&(a, b)| within_segment(p, a, b, radius)) {
                out.set(x, y, color);
            }
        }
    }
    Ok(out)
}

pub(crate) fn validate_text(text: &str, scale: u32) -> Result<()> {
    if scale == 0 {
        return Err(Error::param("text scale must be at least 1"));
    }
    let font = Font::builtin();
    if let Some(c) = text.chars().find(|&c| font.glyph(c).is_none()) {
        return Err(Error::param(format!(
            "unsupported codepoint U+{:04X} in text",
            c as u32
        )));
    }
    Ok(())
}

/// Box covering every glyph body of the string, clipped to the image.
pub fn text_footprint(origin: (i64, i64), text: &str, scale: u32, width: u32, height: u32) -> Option<Region> {
    let n = text.chars().count() as i64;
    if n == 0 {
        return None;
    }
    let s = scale as i64;
    let x1 = origin.0 + ((n - 1) * GLYPH_ADVANCE as i64 + GLYPH_WIDTH as i64) * s;
    let y1 = origin.1 + GLYPH_HEIGHT as i64 * s;
    Region::clipped(origin.0, origin.1, x1, y1, width, height)
}

/// Renders `text` with the bundled bitmap font. Glyph `i` starts at
/// `origin.x + i * 6 * scale`; each lit font cell becomes a `scale x scale`
/// block of `color`. Anything outside the image is clipped.
pub fn draw_text(
    img: &RasterImage,
    origin: (i64, i64),
    text: &str,
    scale: u32,
    color: Pixel,
) -> Result<RasterImage> {
    validate_text(text, scale)?;
    let font = Font::builtin();
    let mut out = img.clone();
    let s = scale as i64;
    for (i, c) in text.chars().enumerate() {
        let glyph = font.glyph(c).expect("validated");
        let gx0 = origin.0 + i as i64 * GLYPH_ADVANCE as i64 * s;
        for gy in 0..GLYPH_HEIGHT {
            for gx in 0..GLYPH_WIDTH {
                if !glyph.is_lit(gx, gy) {
                    continue;
                }
                for dy in 0..s {
                    for dx in 0..s {
                        let x = gx0 + gx as i64 * s + dx;
                        let y = origin.1 + gy as i64 * s + dy;
                        if out.contains(x, y) {
                            out.set(x as u32, y as u32, color);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn new_canvas(width: u32, height: u32, fill: Pixel) -> Result<RasterImage> {
    RasterImage::filled(width, height, fill)
}

pub fn import_image(bytes: &[u8], format: ImageFormat) -> Result<RasterImage> {
    RasterImage::decode(bytes, format)
}

/// Resetting returns the project's initial state.
pub fn reset(root: &RasterImage) -> RasterImage {
    root.clone()
}
