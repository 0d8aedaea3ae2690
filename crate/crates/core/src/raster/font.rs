use std::sync::OnceLock;

pub const GLYPH_WIDTH: u32 = 5;
pub const GLYPH_HEIGHT: u32 = 7;

const FONT_ASSET: &str = include_str!("../../assets/font5x7.txt");

/// Row bitmaps of one glyph, top row first. Bit 4 of each row is the
/// leftmost column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Glyph {
    rows: [u8; GLYPH_HEIGHT as usize],
}

impl Glyph {
    pub fn is_lit(&self, x: u32, y: u32) -> bool {
        x < GLYPH_WIDTH && y < GLYPH_HEIGHT && self.rows[y as usize] >> (GLYPH_WIDTH - 1 - x) & 1 == 1
    }
}

/// The bundled 5x7 bitmap font covering printable ASCII.
pub struct Font {
    glyphs: [Glyph; 95],
}

impl Font {
    pub fn builtin() -> &'static Font {
        static FONT: OnceLock<Font> = OnceLock::new();
        FONT.get_or_init(|| Font::parse(FONT_ASSET).expect("bundled font asset is well formed"))
    }

    pub fn glyph(&self, c: char) -> Option<&Glyph> {
        match c {
            ' '..='~' => Some(&self.glyphs[c as usize - 0x20]),
            _ => None,
        }
    }

    fn parse(src: &str) -> Result<Font, String> {
        let mut glyphs = [Glyph { rows: [0; 7] }; 95];
        let mut seen = [false; 95];
        let mut lines = src
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with(';'));
        while let Some(header) = lines.next() {
            let code = header
                .strip_prefix("0x")
                .and_then(|h| u32::from_str_radix(h, 16).ok())
                .filter(|c| (0x20..=0x7e).contains(c))
                .ok_or_else(|| format!("bad glyph header {header:?}"))?;
            let slot = (code - 0x20) as usize;
            for row in 0..GLYPH_HEIGHT as usize {
                let bits = lines
                    .next()
                    .ok_or_else(|| format!("glyph {header} is truncated"))?;
                if bits.len() != GLYPH_WIDTH as usize {
                    return Err(format!("glyph {header} row {row} has width {}", bits.len()));
                }
                glyphs[slot].rows[row] = bits
                    .bytes()
                    .fold(0, |acc, b| acc << 1 | u8::from(b == b'#'));
            }
            seen[slot] = true;
        }
        match seen.iter().position(|s| !s) {
            Some(missing) => Err(format!("glyph 0x{:02X} missing", missing + 0x20)),
            None => Ok(Font { glyphs }),
        }
    }
}
