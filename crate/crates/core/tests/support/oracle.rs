//! Straightforward per-pixel reference implementations, written from the
//! operation definitions without reusing any engine code.

use std::collections::HashMap;

use imgvc_core::{EditOp, NodeId, Pixel, RasterImage, RevisionDag};

/// Plain RGBA grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    pub w: usize,
    pub h: usize,
    pub px: Vec<[u8; 4]>,
}

impl Grid {
    pub fn of(img: &RasterImage) -> Grid {
        Grid {
            w: img.width() as usize,
            h: img.height() as usize,
            px: img.pixels().iter().map(|p| [p.r, p.g, p.b, p.a]).collect(),
        }
    }

    pub fn to_image(&self) -> RasterImage {
        let bytes: Vec<u8> = self.px.iter().flatten().copied().collect();
        RasterImage::from_rgba_bytes(self.w as u32, self.h as u32, &bytes).unwrap()
    }

    pub fn at(&self, x: usize, y: usize) -> [u8; 4] {
        self.px[y * self.w + x]
    }

    fn build(w: usize, h: usize, f: impl Fn(usize, usize) -> [u8; 4]) -> Grid {
        let mut px = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                px.push(f(x, y));
            }
        }
        Grid { w, h, px }
    }

    fn per_channel(&self, f: impl Fn(u8) -> u8) -> Grid {
        Grid::build(self.w, self.h, |x, y| {
            let [r, g, b, a] = self.at(x, y);
            [f(r), f(g), f(b), a]
        })
    }
}

fn rgba(p: Pixel) -> [u8; 4] {
    [p.r, p.g, p.b, p.a]
}

/// round(num / den) with halves rounded up, for nonnegative values.
fn round_div(num: u64, den: u64) -> u64 {
    let q = num / den;
    if (num % den) * 2 >= den {
        q + 1
    } else {
        q
    }
}

fn clamp8(v: u64) -> u8 {
    v.min(255) as u8
}

pub fn mirror(g: &Grid) -> Grid {
    Grid::build(g.w, g.h, |x, y| g.at(g.w - 1 - x, y))
}

pub fn flip(g: &Grid) -> Grid {
    Grid::build(g.w, g.h, |x, y| g.at(x, g.h - 1 - y))
}

pub fn transpose(g: &Grid) -> Grid {
    Grid::build(g.h, g.w, |x, y| g.at(y, x))
}

pub fn scale(g: &Grid, nw: usize, nh: usize) -> Grid {
    Grid::build(nw, nh, |x, y| g.at(x * g.w / nw, y * g.h / nh))
}

pub fn invert(g: &Grid) -> Grid {
    g.per_channel(|c| 255 - c)
}

pub fn brightness(g: &Grid, milli: u32) -> Grid {
    g.per_channel(|c| clamp8(round_div(c as u64 * milli as u64, 1000)))
}

pub fn grayscale(g: &Grid) -> Grid {
    Grid::build(g.w, g.h, |x, y| {
        let [r, gr, b, a] = g.at(x, y);
        let l = clamp8(round_div(299 * r as u64 + 587 * gr as u64 + 114 * b as u64, 1000));
        [l, l, l, a]
    })
}

pub fn sepia(g: &Grid) -> Grid {
    const M: [[u64; 3]; 3] = [[393, 769, 189], [349, 686, 168], [272, 534, 131]];
    Grid::build(g.w, g.h, |x, y| {
        let [r, gr, b, a] = g.at(x, y);
        let row = |k: usize| clamp8(round_div(M[k][0] * r as u64 + M[k][1] * gr as u64 + M[k][2] * b as u64, 1000));
        [row(0), row(1), row(2), a]
    })
}

pub fn solarize(g: &Grid, threshold: u16) -> Grid {
    g.per_channel(|c| if c as u16 >= threshold { 255 - c } else { c })
}

pub fn posterize(g: &Grid, bits: u8) -> Grid {
    let mask = (256u32 - (1u32 << (8 - bits))) as u8;
    g.per_channel(|c| c & mask)
}

pub fn equalize(g: &Grid) -> Grid {
    let n = (g.w * g.h) as u64;
    let mut maps = Vec::new();
    for ch in 0..3 {
        let mut hist = [0u64; 256];
        for p in &g.px {
            hist[p[ch] as usize] += 1;
        }
        let mut cdf = [0u64; 256];
        let mut acc = 0;
        for v in 0..256 {
            acc += hist[v];
            cdf[v] = acc;
        }
        let cdf_min = *cdf.iter().find(|&&c| c > 0).unwrap();
        let map: Vec<u8> = (0..256)
            .map(|v| {
                if cdf_min == n {
                    v as u8
                } else {
                    clamp8(round_div(cdf[v].saturating_sub(cdf_min) * 255, n - cdf_min))
                }
            })
            .collect();
        maps.push(map);
    }
    Grid::build(g.w, g.h, |x, y| {
        let [r, gr, b, a] = g.at(x, y);
        [maps[0][r as usize], maps[1][gr as usize], maps[2][b as usize], a]
    })
}

pub fn crop(g: &Grid, x0: usize, y0: usize, w: usize, h: usize) -> Grid {
    Grid::build(w, h, |x, y| g.at(x0 + x, y0 + y))
}

/// Whether pixel `p` lies strictly closer than `r` to segment `a`-`b`,
/// decided in exact integer arithmetic.
pub fn near_segment(p: (i64, i64), a: (i64, i64), b: (i64, i64), r: i64) -> bool {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let (apx, apy) = (p.0 - a.0, p.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let dot = apx * abx + apy * aby;
    if len2 == 0 || dot <= 0 {
        return apx * apx + apy * apy < r * r;
    }
    if dot >= len2 {
        let (bpx, bpy) = (p.0 - b.0, p.1 - b.1);
        return bpx * bpx + bpy * bpy < r * r;
    }
    // Perpendicular distance squared is cross^2 / len2.
    let cross = apx * aby - apy * abx;
    (cross as i128) * (cross as i128) < (r as i128) * (r as i128) * (len2 as i128)
}

pub fn brush(g: &Grid, points: &[(i64, i64)], radius: i64, color: [u8; 4]) -> Grid {
    let segments: Vec<_> = if points.len() == 1 {
        vec![(points[0], points[0])]
    } else {
        points.windows(2).map(|w| (w[0], w[1])).collect()
    };
    Grid::build(g.w, g.h, |x, y| {
        let p = (x as i64, y as i64);
        if segments.iter().any(|&(a, b)| near_segment(p, a, b, radius)) {
            color
        } else {
            g.at(x, y)
        }
    })
}

/// Glyph bitmaps read straight from the bundled font asset.
pub fn font_asset() -> HashMap<char, Vec<Vec<bool>>> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/assets/font5x7.txt")).unwrap();
    let mut font = HashMap::new();
    let mut lines = text.lines().filter(|l| !l.starts_with(';') && !l.trim().is_empty());
    while let Some(head) = lines.next() {
        let code = u32::from_str_radix(head.trim().trim_start_matches("0x"), 16).unwrap();
        let rows: Vec<Vec<bool>> = (0..7)
            .map(|_| lines.next().unwrap().chars().map(|c| c == '#').collect())
            .collect();
        font.insert(char::from_u32(code).unwrap(), rows);
    }
    font
}

pub fn text(g: &Grid, origin: (i64, i64), s: &str, scale: i64, color: [u8; 4]) -> Grid {
    let font = font_asset();
    let chars: Vec<char> = s.chars().collect();
    Grid::build(g.w, g.h, |x, y| {
        let dx = x as i64 - origin.0;
        let dy = y as i64 - origin.1;
        if dx < 0 || dy < 0 || dy >= 7 * scale {
            return g.at(x, y);
        }
        let cell = (dx / (6 * scale)) as usize;
        let within = dx - cell as i64 * 6 * scale;
        if cell >= chars.len() || within >= 5 * scale {
            return g.at(x, y);
        }
        let glyph = &font[&chars[cell]];
        if glyph[(dy / scale) as usize][(within / scale) as usize] {
            color
        } else {
            g.at(x, y)
        }
    })
}

/// Reference result of `op` applied to `g`, with `root` as the project's
/// initial state.
pub fn apply(op: &EditOp, g: &Grid, root: &Grid) -> Grid {
    match op {
        EditOp::Mirror => mirror(g),
        EditOp::Flip => flip(g),
        EditOp::Transpose => transpose(g),
        EditOp::Scale { width, height } => scale(g, *width as usize, *height as usize),
        EditOp::Histogram => equalize(g),
        EditOp::Brightness { factor } => brightness(g, factor.milli()),
        EditOp::BlackWhite => grayscale(g),
        EditOp::Sepia => sepia(g),
        EditOp::Invert => invert(g),
        EditOp::Solarize { threshold } => solarize(g, *threshold),
        EditOp::Posterize { bits } => posterize(g, *bits),
        EditOp::Crop { region } => crop(
            g,
            region.x0 as usize,
            region.y0 as usize,
            region.w as usize,
            region.h as usize,
        ),
        EditOp::Text {
            origin,
            text: s,
            scale,
            color,
        } => text(g, *origin, s, *scale as i64, rgba(*color)),
        EditOp::Reset => root.clone(),
        EditOp::Brush { points, radius, color } => {
            let pts: Vec<_> = points.iter().map(|p| (p.x as i64, p.y as i64)).collect();
            brush(g, &pts, *radius as i64, rgba(*color))
        }
        EditOp::New { width, height, fill } => {
            Grid::build(*width as usize, *height as usize, |_, _| rgba(*fill))
        }
        EditOp::Import { image, .. } => Grid::of(image),
    }
}

/// Reference coverage of one merge-relevant operation on a `w x h` canvas:
/// brushes cover their stroke's bounding box grown by the radius, the other
/// operations cover everything.
pub fn covers(op: &EditOp, w: usize, h: usize) -> Vec<bool> {
    match op {
        EditOp::Brush { points, radius, .. } => {
            let r = *radius as i64;
            let xs = points.iter().map(|p| p.x as i64);
            let ys = points.iter().map(|p| p.y as i64);
            let (x0, x1) = (xs.clone().min().unwrap() - r, xs.max().unwrap() + r);
            let (y0, y1) = (ys.clone().min().unwrap() - r, ys.max().unwrap() + r);
            (0..w * h)
                .map(|i| {
                    let (x, y) = ((i % w) as i64, (i / w) as i64);
                    x0 <= x && x <= x1 && y0 <= y && y <= y1
                })
                .collect()
        }
        _ => vec![true; w * h],
    }
}

/// Per-pixel tag of the reference merge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tag {
    Base,
    Left,
    Right,
    ConflictLeft,
    ConflictRight,
}

impl Tag {
    pub fn name(self) -> &'static str {
        match self {
            Tag::Base => "base",
            Tag::Left => "left",
            Tag::Right => "right",
            Tag::ConflictLeft => "conflict-left",
            Tag::ConflictRight => "conflict-right",
        }
    }
}

/// Brute-force three-way merge. Each side is the list of `(timestamp, op)`
/// applied since the base, in order; `base` is the base state.
pub fn three_way(base: &Grid, root: &Grid, left: &[(i64, EditOp)], right: &[(i64, EditOp)]) -> (Grid, Vec<Tag>) {
    let run = |side: &[(i64, EditOp)]| side.iter().fold(base.clone(), |g, (_, op)| apply(op, &g, root));
    let (l, r) = (run(left), run(right));
    assert_eq!((l.w, l.h), (r.w, r.h), "sides must agree on dimensions");
    let same_base = (base.w, base.h) == (l.w, l.h);
    let latest = |side: &[(i64, EditOp)], i: usize| {
        side.iter()
            .filter(|(_, op)| covers(op, l.w, l.h)[i])
            .map(|(t, _)| *t)
            .max()
    };
    let mut px = Vec::new();
    let mut tags = Vec::new();
    for i in 0..l.w * l.h {
        let b = same_base.then(|| base.px[i]);
        let (lv, rv) = (l.px[i], r.px[i]);
        let (v, t) = if lv == rv {
            (lv, if b == Some(lv) { Tag::Base } else { Tag::Left })
        } else if b == Some(lv) {
            (rv, Tag::Right)
        } else if b == Some(rv) {
            (lv, Tag::Left)
        } else if latest(right, i) > latest(left, i) {
            (rv, Tag::ConflictRight)
        } else {
            (lv, Tag::ConflictLeft)
        };
        px.push(v);
        tags.push(t);
    }
    (Grid { w: l.w, h: l.h, px }, tags)
}

/// Replays `head` by walking parents and applying reference operations,
/// taking merge nodes' stored pixels as given.
pub fn replay(dag: &RevisionDag, head: NodeId) -> Grid {
    let mut chain = vec![head];
    loop {
        let node = dag.node(*chain.last().unwrap()).unwrap();
        let full_state = node.is_merge() || node.action.as_edit().is_some_and(|op| op.is_initializer());
        if full_state {
            break;
        }
        chain.push(node.parents[0]);
    }
    let root = root_grid(dag);
    let mut g = Grid { w: 0, h: 0, px: Vec::new() };
    for id in chain.into_iter().rev() {
        g = match &dag.node(id).unwrap().action {
            imgvc_core::NodeAction::Merge(img) => Grid::of(img),
            imgvc_core::NodeAction::Edit(op) => apply(op, &g, &root),
        };
    }
    g
}

pub fn root_grid(dag: &RevisionDag) -> Grid {
    let empty = Grid { w: 0, h: 0, px: Vec::new() };
    match &dag.root().action {
        imgvc_core::NodeAction::Edit(op) => apply(op, &empty, &empty),
        imgvc_core::NodeAction::Merge(img) => Grid::of(img),
    }
}
