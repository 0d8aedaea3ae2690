//! Serializable editing operations and the dispatcher that applies them.

use std::fmt;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;

use crate::error::{Error, Result};
use crate::raster::ops::{self, Factor, Orientation, Point};
use crate::raster::{ImageFormat, Pixel, RasterImage, Region};

/// One editing operation with its parameters. This is the payload recorded
/// for every non-merge node of the history.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EditOp {
    Mirror,
    Flip,
    Transpose,
    Scale { width: u32, height: u32 },
    Histogram,
    Brightness { factor: Factor },
    BlackWhite,
    Sepia,
    Invert,
    Solarize { threshold: u16 },
    Posterize { bits: u8 },
    Crop { region: Region },
    Text {
        origin: (i64, i64),
        text: String,
        scale: u32,
        color: Pixel,
    },
    Reset,
    Brush {
        points: Vec<Point>,
        radius: u32,
        color: Pixel,
    },
    New { width: u32, height: u32, fill: Pixel },
    /// The decoded pixels are authoritative; the source bytes are not kept.
    Import {
        format: ImageFormat,
        image: Arc<RasterImage>,
    },
}

/// Output of [`apply_edit`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Applied {
    pub image: RasterImage,
    /// Pixels the operation may have touched; `None` when it provably touched
    /// nothing (e.g. fully clipped text).
    pub region: Option<Region>,
}

pub const KINDS: [&str; 17] = [
    "Mirror",
    "Flip",
    "Transpose",
    "Scale",
    "Histogram",
    "Brightness",
    "BlackWhite",
    "Sepia",
    "Invert",
    "Solarize",
    "Posterize",
    "Crop",
    "Text",
    "Reset",
    "Brush",
    "New",
    "Import",
];

impl EditOp {
    pub fn kind(&self) -> &'static str {
        match self {
            EditOp::Mirror => "Mirror",
            EditOp::Flip => "Flip",
            EditOp::Transpose => "Transpose",
            EditOp::Scale { .. } => "Scale",
            EditOp::Histogram => "Histogram",
            EditOp::Brightness { .. } => "Brightness",
            EditOp::BlackWhite => "BlackWhite",
            EditOp::Sepia => "Sepia",
            EditOp::Invert => "Invert",
            EditOp::Solarize { .. } => "Solarize",
            EditOp::Posterize { .. } => "Posterize",
            EditOp::Crop { .. } => "Crop",
            EditOp::Text { .. } => "Text",
            EditOp::Reset => "Reset",
            EditOp::Brush { .. } => "Brush",
            EditOp::New { .. } => "New",
            EditOp::Import { .. } => "Import",
        }
    }

    /// New and Import are the only kinds allowed at the root.
    pub fn is_initializer(&self) -> bool {
        matches!(self, EditOp::New { .. } | EditOp::Import { .. })
    }

    /// Imports the given encoded image.
    pub fn import(bytes: &[u8], format: ImageFormat) -> Result<Self> {
        Ok(EditOp::Import {
            format,
            image: Arc::new(ops::import_image(bytes, format)?),
        })
    }

    /// Checks the parameters against an input image of the given size.
    pub fn validate(&self, width: u32, height: u32) -> Result<()> {
        match self {
            EditOp::Scale { width: w, height: h } | EditOp::New { width: w, height: h, .. } => {
                if *w == 0 || *h == 0 {
                    return Err(Error::param(format!("dimensions must be at least 1x1, got {w}x{h}")));
                }
            }
            EditOp::Solarize { threshold } if *threshold > 256 => {
                return Err(Error::param(format!("solarize threshold {threshold} outside 0..=256")));
            }
            EditOp::Posterize { bits } if !(1..=8).contains(bits) => {
                return Err(Error::param(format!("posterize bits {bits} outside 1..=8")));
            }
            EditOp::Crop { region } if !region.fits_within(width, height) => {
                return Err(Error::param(format!(
                    "crop region {}x{}+{}+{} escapes the {width}x{height} image",
                    region.w, region.h, region.x0, region.y0
                )));
            }
            EditOp::Text { text, scale, .. } => ops::validate_text(text, *scale)?,
            EditOp::Brush { points, radius, .. } => ops::validate_brush(points, *radius, width, height)?,
            _ => {}
        }
        Ok(())
    }

    /// Size of the result when applied to a `width x height` input.
    pub fn output_dims(&self, width: u32, height: u32, root: (u32, u32)) -> (u32, u32) {
        match self {
            EditOp::Transpose => (height, width),
            EditOp::Scale { width, height } | EditOp::New { width, height, .. } => (*width, *height),
            EditOp::Crop { region } => (region.w, region.h),
            EditOp::Import { image, .. } => image.dims(),
            EditOp::Reset => root,
            _ => (width, height),
        }
    }

    /// The rectangle this operation may touch when applied to a
    /// `width x height` input. Operations that change the image size cover
    /// the union of the input and output extents.
    pub fn footprint(&self, width: u32, height: u32, root: (u32, u32)) -> Option<Region> {
        match self {
            EditOp::Crop { region } => Some(*region),
            EditOp::Brush { points, radius, .. } => ops::brush_footprint(points, *radius, width, height),
            EditOp::Text {
                origin, text, scale, ..
            } => ops::text_footprint(*origin, text, *scale, width, height),
            _ => {
                let (ow, oh) = self.output_dims(width, height, root);
                Some(Region::new(0, 0, width.max(ow), height.max(oh)))
            }
        }
    }

    /// Flat key/value record: `kind` first, then the kind's parameters.
    pub fn to_record(&self) -> Vec<(&'static str, String)> {
        let mut rec = vec![("kind", self.kind().to_string())];
        match self {
            EditOp::Scale { width, height } => {
                rec.push(("scale_w", width.to_string()));
                rec.push(("scale_h", height.to_string()));
            }
            EditOp::Brightness { factor } => rec.push(("factor", factor.to_string())),
            EditOp::Solarize { threshold } => rec.push(("threshold", threshold.to_string())),
            EditOp::Posterize { bits } => rec.push(("bits", bits.to_string())),
            EditOp::Crop { region } => {
                rec.push(("x0", region.x0.to_string()));
                rec.push(("y0", region.y0.to_string()));
                rec.push(("w", region.w.to_string()));
                rec.push(("h", region.h.to_string()));
            }
            EditOp::Text {
                origin,
                text,
                scale,
                color,
            } => {
                rec.push(("x0", origin.0.to_string()));
                rec.push(("y0", origin.1.to_string()));
                rec.push(("text", text.clone()));
                rec.push(("scale", scale.to_string()));
                rec.push(("color", color.to_string()));
            }
            EditOp::Brush { points, radius, color } => {
                let pts = points
                    .iter()
                    .map(|p| format!("{},{}", p.x, p.y))
                    .collect::<Vec<_>>()
                    .join(";");
                rec.push(("points", pts));
                rec.push(("radius", radius.to_string()));
                rec.push(("color", color.to_string()));
            }
            EditOp::New { width, height, fill } => {
                rec.push(("w", width.to_string()));
                rec.push(("h", height.to_string()));
                rec.push(("color", fill.to_string()));
            }
            EditOp::Import { format, image } => {
                rec.push(("format", format.to_string()));
                rec.push(("w", image.width().to_string()));
                rec.push(("h", image.height().to_string()));
                rec.push(("pixels", BASE64.encode(image.to_rgba_bytes())));
            }
            EditOp::Mirror
            | EditOp::Flip
            | EditOp::Transpose
            | EditOp::Histogram
            | EditOp::BlackWhite
            | EditOp::Sepia
            | EditOp::Invert
            | EditOp::Reset => {}
        }
        rec
    }

    /// Parses a record produced by [`EditOp::to_record`]. Kind names are
    /// matched case-insensitively; unknown keys are rejected.
    pub fn from_record<K, V>(pairs: impl IntoIterator<Item = (K, V)>) -> Result<Self>
    where
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut rec = Record::default();
        for (k, v) in pairs {
            let (k, v) = (k.as_ref(), v.as_ref());
            if rec.entries.iter().any(|(ek, _)| ek == k) {
                return Err(Error::param(format!("parameter {k:?} given twice")));
            }
            rec.entries.push((k.to_string(), v.to_string()));
        }
        let kind = rec.take("kind")?;
        let kind = KINDS
            .iter()
            .find(|k| k.eq_ignore_ascii_case(&kind) || (kind.eq_ignore_ascii_case("b&w") && **k == "BlackWhite"))
            .ok_or_else(|| Error::param(format!("unknown operation kind {kind:?}")))?;
        let op = match *kind {
            "Mirror" => EditOp::Mirror,
            "Flip" => EditOp::Flip,
            "Transpose" => EditOp::Transpose,
            "Scale" => EditOp::Scale {
                width: rec.num("scale_w")?,
                height: rec.num("scale_h")?,
            },
            "Histogram" => EditOp::Histogram,
            "Brightness" => EditOp::Brightness {
                factor: rec.take("factor")?.parse()?,
            },
            "BlackWhite" => EditOp::BlackWhite,
            "Sepia" => EditOp::Sepia,
            "Invert" => EditOp::Invert,
            "Solarize" => EditOp::Solarize {
                threshold: rec.num("threshold")?,
            },
            "Posterize" => EditOp::Posterize { bits: rec.num("bits")? },
            "Crop" => EditOp::Crop {
                region: Region::new(rec.num("x0")?, rec.num("y0")?, rec.num("w")?, rec.num("h")?),
            },
            "Text" => EditOp::Text {
                origin: (rec.num("x0")?, rec.num("y0")?),
                text: rec.take("text")?,
                scale: rec.num_or("scale", 1)?,
                color: rec.color_or(Pixel::BLACK)?,
            },
            "Reset" => EditOp::Reset,
            "Brush" => EditOp::Brush {
                points: parse_points(&rec.take("points")?)?,
                radius: rec.num_or("radius", 1)?,
                color: rec.color_or(Pixel::BLACK)?,
            },
            "New" => EditOp::New {
                width: rec.num("w")?,
                height: rec.num("h")?,
                fill: rec.color_or(Pixel::WHITE)?,
            },
            "Import" => {
                let format: ImageFormat = rec.take("format")?.parse()?;
                let (w, h) = (rec.num("w")?, rec.num("h")?);
                let bytes = BASE64
                    .decode(rec.take("pixels")?)
                    .map_err(|e| Error::param(format!("pixels: {e}")))?;
                EditOp::Import {
                    format,
                    image: Arc::new(RasterImage::from_rgba_bytes(w, h, &bytes)?),
                }
            }
            _ => unreachable!(),
        };
        if let Some((k, _)) = rec.entries.first() {
            return Err(Error::param(format!("unexpected parameter {k:?} for {}", op.kind())));
        }
        Ok(op)
    }

    /// One-line human description, e.g. `Brightness factor=1.500`.
    pub fn summary(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind())?;
        for (k, v) in self.to_record().into_iter().skip(1) {
            if k == "pixels" {
                continue;
            }
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

fn parse_points(s: &str) -> Result<Vec<Point>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let (x, y) = pair
                .split_once(',')
                .ok_or_else(|| Error::param(format!("point {pair:?} is not x,y")))?;
            let coord = |c: &str| {
                c.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::param(format!("point {pair:?} is not x,y")))
            };
            Ok(Point::new(coord(x)?, coord(y)?))
        })
        .collect()
}

#[derive(Default)]
struct Record {
    entries: Vec<(String, String)>,
}

impl Record {
    fn take_opt(&mut self, key: &str) -> Option<String> {
        let i = self.entries.iter().position(|(k, _)| k == key)?;
        Some(self.entries.remove(i).1)
    }

    fn take(&mut self, key: &str) -> Result<String> {
        self.take_opt(key)
            .ok_or_else(|| Error::param(format!("missing parameter {key:?}")))
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.take(key)?;
        v.trim()
            .parse()
            .map_err(|_| Error::param(format!("parameter {key}={v:?} is not a valid number")))
    }

    fn num_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        if self.entries.iter().any(|(k, _)| k == key) {
            self.num(key)
        } else {
            Ok(default)
        }
    }

    fn color_or(&mut self, default: Pixel) -> Result<Pixel> {
        self.take_opt("color").map_or(Ok(default), |c| c.parse())
    }
}

/// Applies `op` to `img`. `root` is the project's initial state, which
/// `Reset` restores.
pub fn apply_edit(img: &RasterImage, op: &EditOp, root: &RasterImage) -> Result<Applied> {
    op.validate(img.width(), img.height())?;
    let image = match op {
        EditOp::Mirror => ops::reorient(img, Orientation::Mirror),
        EditOp::Flip => ops::reorient(img, Orientation::Flip),
        EditOp::Transpose => ops::reorient(img, Orientation::Transpose),
        EditOp::Scale { width, height } => ops::scale(img, *width, *height)?,
        EditOp::Histogram => ops::equalize_histogram(img),
        EditOp::Brightness { factor } => ops::brightness(img, *factor),
        EditOp::BlackWhite => ops::grayscale(img),
        EditOp::Sepia => ops::sepia(img),
        EditOp::Invert => ops::invert(img),
        EditOp::Solarize { threshold } => ops::solarize(img, *threshold)?,
        EditOp::Posterize { bits } => ops::posterize(img, *bits)?,
        EditOp::Crop { region } => ops::crop(img, *region)?,
        EditOp::Text {
            origin,
            text,
            scale,
            color,
        } => ops::draw_text(img, *origin, text, *scale, *color)?,
        EditOp::Reset => ops::reset(root),
        EditOp::Brush { points, radius, color } => ops::brush(img, points, *radius, *color)?,
        EditOp::New { width, height, fill } => ops::new_canvas(*width, *height, *fill)?,
        EditOp::Import { image, .. } => RasterImage::clone(image),
    };
    let region = op.footprint(img.width(), img.height(), root.dims());
    Ok(Applied { image, region })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canvas(w: u32, h: u32) -> RasterImage {
        RasterImage::from_fn(w, h, |x, y| Pixel::rgba((x * 31) as u8, (y * 17) as u8, 100, 255)).unwrap()
    }

    #[test]
    fn invert_dispatch_covers_whole_image() {
        let img = canvas(5, 4);
        let out = apply_edit(&img, &EditOp::Invert, &img).unwrap();
        assert_eq!(out.image, ops::invert(&img));
        assert_eq!(out.region, Some(Region::new(0, 0, 5, 4)));
    }

    #[test]
    fn brush_region_is_box_around_point() {
        let img = canvas(6, 6);
        let op = EditOp::Brush {
            points: vec![Point::new(3, 2)],
            radius: 1,
            color: Pixel::WHITE,
        };
        assert_eq!(apply_edit(&img, &op, &img).unwrap().region, Some(Region::new(2, 1, 3, 3)));
        let corner = EditOp::Brush {
            points: vec![Point::new(5, 5)],
            radius: 1,
            color: Pixel::WHITE,
        };
        assert_eq!(apply_edit(&img, &corner, &img).unwrap().region, Some(Region::new(4, 4, 2, 2)));
    }

    #[test]
    fn crop_region_is_the_rectangle() {
        let img = canvas(6, 6);
        let r = Region::new(1, 2, 3, 2);
        let out = apply_edit(&img, &EditOp::Crop { region: r }, &img).unwrap();
        assert_eq!(out.image, ops::crop(&img, r).unwrap());
        assert_eq!(out.region, Some(r));
    }

    #[test]
    fn reset_restores_root() {
        let root = canvas(3, 3);
        let edited = ops::invert(&ops::scale(&root, 7, 2).unwrap());
        let out = apply_edit(&edited, &EditOp::Reset, &root).unwrap();
        assert_eq!(out.image, root);
        assert_eq!(out.region, Some(Region::new(0, 0, 7, 3)));
    }

    #[test]
    fn brightness_record_format() {
        let op = EditOp::Brightness {
            factor: "1.5".parse().unwrap(),
        };
        assert_eq!(
            op.to_record(),
            vec![("kind", "Brightness".to_string()), ("factor", "1.500".to_string())]
        );
        assert_eq!(op.to_string(), "Brightness factor=1.500");
    }

    #[test]
    fn record_parsing_errors() {
        let parse = |pairs: &[(&str, &str)]| EditOp::from_record(pairs.iter().copied());
        assert!(parse(&[("kind", "Blur")]).is_err());
        assert!(parse(&[("factor", "1")]).is_err());
        assert!(parse(&[("kind", "Invert"), ("factor", "1")]).is_err());
        assert!(parse(&[("kind", "Brightness"), ("factor", "-0.5")]).is_err());
        assert!(parse(&[("kind", "Brush"), ("points", "1;2")]).is_err());
        assert!(parse(&[("kind", "Invert"), ("kind", "Invert")]).is_err());
        assert_eq!(parse(&[("kind", "invert")]).unwrap(), EditOp::Invert);
        assert_eq!(parse(&[("kind", "B&W")]).unwrap(), EditOp::BlackWhite);
        assert_eq!(
            parse(&[("kind", "brush"), ("points", "1,2;3,4")]).unwrap(),
            EditOp::Brush {
                points: vec![Point::new(1, 2), Point::new(3, 4)],
                radius: 1,
                color: Pixel::BLACK
            }
        );
    }

    #[test]
    fn every_kind_round_trips_through_its_record() {
        let img = Arc::new(canvas(2, 3));
        let ops = vec![
            EditOp::Mirror,
            EditOp::Flip,
            EditOp::Transpose,
            EditOp::Scale { width: 3, height: 9 },
            EditOp::Histogram,
            EditOp::Brightness { factor: Factor::from_milli(1234) },
            EditOp::BlackWhite,
            EditOp::Sepia,
            EditOp::Invert,
            EditOp::Solarize { threshold: 256 },
            EditOp::Posterize { bits: 3 },
            EditOp::Crop { region: Region::new(1, 0, 1, 2) },
            EditOp::Text {
                origin: (-3, 4),
                text: "a, \"quoted\"; text".into(),
                scale: 2,
                color: Pixel::rgba(1, 2, 3, 4),
            },
            EditOp::Reset,
            EditOp::Brush {
                points: vec![Point::new(0, 0), Point::new(1, 2)],
                radius: 4,
                color: Pixel::WHITE,
            },
            EditOp::New { width: 2, height: 2, fill: Pixel::TRANSPARENT },
            EditOp::Import { format: ImageFormat::Jpeg, image: img },
        ];
        assert_eq!(ops.len(), KINDS.len());
        for op in ops {
            let back = EditOp::from_record(op.to_record()).unwrap();
            assert_eq!(back, op);
        }
    }
}
