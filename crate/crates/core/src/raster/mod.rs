//! In-memory RGBA8 rasters and the deterministic editing operations applied
//! to them.

mod font;
pub mod ops;

use std::fmt;
use std::io::Cursor;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use font::{Font, Glyph, GLYPH_HEIGHT, GLYPH_WIDTH};

/// One RGBA pixel with 8 bits per channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Pixel {
    pub r: u8,
    pub g: u8,
    pub b: u8,
    pub a: u8,
}

impl Pixel {
    pub const BLACK: Pixel = Pixel::rgba(0, 0, 0, 255);
    pub const WHITE: Pixel = Pixel::rgba(255, 255, 255, 255);
    pub const TRANSPARENT: Pixel = Pixel::rgba(0, 0, 0, 0);

    pub const fn rgba(r: u8, g: u8, b: u8, a: u8) -> Self {
        Pixel { r, g, b, a }
    }

    pub const fn to_array(self) -> [u8; 4] {
        [self.r, self.g, self.b, self.a]
    }

    pub const fn from_array([r, g, b, a]: [u8; 4]) -> Self {
        Pixel { r, g, b, a }
    }

    /// Applies `f` to the three color channels, leaving alpha untouched.
    #[inline]
    pub fn map_rgb(self, mut f: impl FnMut(u8) -> u8) -> Self {
        Pixel {
            r: f(self.r),
            g: f(self.g),
            b: f(self.b),
            a: self.a,
        }
    }
}

/// `#RRGGBBAA`
impl fmt::Display for Pixel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02X}{:02X}{:02X}{:02X}", self.r, self.g, self.b, self.a)
    }
}

impl FromStr for Pixel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let hex = s
            .strip_prefix('#')
            .filter(|h| h.len() == 8 && h.is_ascii())
            .ok_or_else(|| Error::param(format!("color {s:?} is not #RRGGBBAA")))?;
        let mut out = [0u8; 4];
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|_| Error::param(format!("color {s:?} is not #RRGGBBAA")))?;
        }
        Ok(Pixel::from_array(out))
    }
}

/// A width x height grid of pixels in row-major order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<Pixel>,
}

impl fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn filled(width: u32, height: u32, fill: Pixel) -> Result<Self> {
        check_dims(width, height)?;
        Ok(RasterImage {
            width,
            height,
            pixels: vec![fill; width as usize * height as usize],
        })
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<Pixel>) -> Result<Self> {
        check_dims(width, height)?;
        if pixels.len() != width as usize * height as usize {
            return Err(Error::param(format!(
                "{} pixels supplied for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from packed RGBA bytes.
    pub fn from_rgba_bytes(width: u32, height: u32, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width as usize * height as usize * 4 {
            return Err(Error::param(format!(
                "{} bytes supplied for a {width}x{height} RGBA image",
                bytes.len()
            )));
        }
        let pixels = bytes
            .chunks_exact(4)
            .map(|c| Pixel::rgba(c[0], c[1], c[2], c[3]))
            .collect();
        Self::from_pixels(width, height, pixels)
    }

    /// Builds an image by evaluating `f(x, y)` for every coordinate.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Pixel) -> Result<Self> {
        check_dims(width, height)?;
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[Pixel] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [Pixel] {
        &mut self.pixels
    }

    pub fn full_region(&self) -> Region {
        Region::new(0, 0, self.width, self.height)
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    /// # Panics
    /// If `(x, y)` lies outside the image.
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Pixel {
        assert!(x < self.width && y < self.height, "({x}, {y}) out of bounds");
        self.pixels[self.index(x, y)]
    }

    /// # Panics
    /// If `(x, y)` lies outside the image.
    #[inline]
    pub fn set(&mut self, x: u32, y: u32, p: Pixel) {
        assert!(x < self.width && y < self.height, "({x}, {y}) out of bounds");
        let i = self.index(x, y);
        self.pixels[i] = p;
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    pub fn to_rgba_bytes(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| p.to_array()).collect()
    }

    pub(crate) fn map_pixels(&self, f: impl FnMut(&Pixel) -> Pixel) -> RasterImage {
        RasterImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(f).collect(),
        }
    }

    /// Decodes `bytes` as `format` into canonical RGBA8. Images without an
    /// alpha channel come back fully opaque.
    pub fn decode(bytes: &[u8], format: ImageFormat) -> Result<Self> {
        let decoded = image::load_from_memory_with_format(bytes, format.codec())
            .map_err(|e| Error::Import(e.to_string()))?
            .into_rgba8();
        let (w, h) = decoded.dimensions();
        Self::from_rgba_bytes(w, h, decoded.as_raw()).map_err(|e| Error::Import(e.to_string()))
    }

    /// Encodes the image. JPEG drops the alpha channel and is lossy.
    pub fn encode(&self, format: ImageFormat) -> Result<Vec<u8>> {
        let buf = image::RgbaImage::from_raw(self.width, self.height, self.to_rgba_bytes())
            .expect("buffer length matches dimensions");
        let mut out = Cursor::new(Vec::new());
        let result = match format {
            ImageFormat::Jpeg => image::DynamicImage::ImageRgba8(buf)
                .into_rgb8()
                .write_to(&mut out, format.codec()),
            _ => buf.write_to(&mut out, format.codec()),
        };
        result.map_err(|e| Error::InvalidArgument(format!("cannot encode {format}: {e}")))?;
        Ok(out.into_inner())
    }
}

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::param(format!(
            "image dimensions must be at least 1x1, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Region {
    pub x0: u32,
    pub y0: u32,
    pub w: u32,
    pub h: u32,
}

impl Region {
    pub const fn new(x0: u32, y0: u32, w: u32, h: u32) -> Self {
        Region { x0, y0, w, h }
    }

    /// Exclusive right edge.
    pub fn x1(&self) -> u64 {
        self.x0 as u64 + self.w as u64
    }

    /// Exclusive bottom edge.
    pub fn y1(&self) -> u64 {
        self.y0 as u64 + self.h as u64
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && (x as u64) < self.x1() && y >= self.y0 && (y as u64) < self.y1()
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.w >= 1 && self.h >= 1 && self.x1() <= width as u64 && self.y1() <= height as u64
    }

    pub fn intersects(&self, other: &Region) -> bool {
        (self.x0 as u64) < other.x1()
            && (other.x0 as u64) < self.x1()
            && (self.y0 as u64) < other.y1()
            && (other.y0 as u64) < self.y1()
    }

    /// Clips the half-open box `[x0, x1) x [y0, y1)` (signed) to a
    /// `width x height` image. `None` when nothing remains.
    pub fn clipped(x0: i64, y0: i64, x1: i64, y1: i64, width: u32, height: u32) -> Option<Region> {
        let cx0 = x0.max(0);
        let cy0 = y0.max(0);
        let cx1 = x1.min(width as i64);
        let cy1 = y1.min(height as i64);
        (cx0 < cx1 && cy0 < cy1).then(|| {
            Region::new(
                cx0 as u32,
                cy0 as u32,
                (cx1 - cx0) as u32,
                (cy1 - cy0) as u32,
            )
        })
    }
}

/// Interchange formats accepted for import, export, and milestones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ImageFormat {
    Jpeg,
    Png,
    Tiff,
    Bmp,
}

impl ImageFormat {
    pub const ALL: [ImageFormat; 4] = [
        ImageFormat::Jpeg,
        ImageFormat::Png,
        ImageFormat::Tiff,
        ImageFormat::Bmp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ImageFormat::Jpeg => "jpeg",
            ImageFormat::Png => "png",
            ImageFormat::Tiff => "tiff",
            ImageFormat::Bmp => "bmp",
        }
    }

    pub fn is_lossless(self) -> bool {
        self != ImageFormat::Jpeg
    }

    /// Guesses the format from a file extension.
    pub fn from_extension(ext: &str) -> Result<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "jpg" | "jpeg" => Ok(ImageFormat::Jpeg),
            "png" => Ok(ImageFormat::Png),
            "tif" | "tiff" => Ok(ImageFormat::Tiff),
            "bmp" => Ok(ImageFormat::Bmp),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }

    /// Identifies the format from the file's magic bytes.
    pub fn detect(bytes: &[u8]) -> Result<Self> {
        match image::guess_format(bytes) {
            Ok(image::ImageFormat::Jpeg) => Ok(ImageFormat::Jpeg),
            Ok(image::ImageFormat::Png) => Ok(ImageFormat::Png),
            Ok(image::ImageFormat::Tiff) => Ok(ImageFormat::Tiff),
            Ok(image::ImageFormat::Bmp) => Ok(ImageFormat::Bmp),
            Ok(other) => Err(Error::UnsupportedFormat(format!("{other:?}").to_lowercase())),
            Err(_) => Err(Error::Import("unrecognized image data".into())),
        }
    }

    fn codec(self) -> image::ImageFormat {
        match self {
            ImageFormat::Jpeg => image::ImageFormat::Jpeg,
            ImageFormat::Png => image::ImageFormat::Png,
            ImageFormat::Tiff => image::ImageFormat::Tiff,
            ImageFormat::Bmp => image::ImageFormat::Bmp,
        }
    }
}

impl fmt::Display for ImageFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jpeg" | "jpg" => Ok(ImageFormat::Jpeg),
            "png" => Ok(ImageFormat::Png),
            "tiff" | "tif" => Ok(ImageFormat::Tiff),
            "bmp" => Ok(ImageFormat::Bmp),
            _ => Err(Error::UnsupportedFormat(s.to_string())),
        }
    }
}
