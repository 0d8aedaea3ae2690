//! Seeded fixture generators.

use std::sync::Arc;

use imgvc_core::{
    merge_revisions, EditOp, Factor, ImageFormat, NodeId, Pixel, Point, RasterImage, Region, RevisionDag, Timestamp,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pixel(rng: &mut Rng8) -> Pixel {
    Pixel::rgba(rng.random(), rng.random(), rng.random(), rng.random())
}

/// Random image whose channels favour the extremes 0 and 255.
pub fn image(rng: &mut Rng8, w: u32, h: u32) -> RasterImage {
    RasterImage::from_fn(w, h, |_, _| {
        let mut ch = || match rng.random_range(0..8) {
            0 => 0,
            1 => 255,
            _ => rng.random(),
        };
        Pixel::rgba(ch(), ch(), ch(), ch())
    })
    .unwrap()
}

pub fn import(rng: &mut Rng8, w: u32, h: u32) -> EditOp {
    EditOp::Import {
        format: ImageFormat::Png,
        image: Arc::new(image(rng, w, h)),
    }
}

pub fn point(rng: &mut Rng8, w: u32, h: u32) -> Point {
    Point::new(rng.random_range(0..w), rng.random_range(0..h))
}

pub fn brush(rng: &mut Rng8, w: u32, h: u32, max_points: usize, max_radius: u32) -> EditOp {
    let n = rng.random_range(1..=max_points);
    EditOp::Brush {
        points: (0..n).map(|_| point(rng, w, h)).collect(),
        radius: rng.random_range(1..=max_radius),
        color: pixel(rng),
    }
}

pub fn brightness(rng: &mut Rng8) -> EditOp {
    EditOp::Brightness {
        factor: Factor::from_milli(rng.random_range(0..=3000)),
    }
}

fn text(rng: &mut Rng8) -> String {
    let n = rng.random_range(0..=5);
    (0..n).map(|_| rng.random_range(' '..='~')).collect()
}

/// A valid operation of the given kind for a `w x h` input. `max_dim`
/// bounds the size of operations that pick new dimensions.
pub fn op_of_kind(rng: &mut Rng8, kind: &str, w: u32, h: u32, max_dim: u32) -> EditOp {
    match kind {
        "Mirror" => EditOp::Mirror,
        "Flip" => EditOp::Flip,
        "Transpose" => EditOp::Transpose,
        "Scale" => EditOp::Scale {
            width: rng.random_range(1..=max_dim),
            height: rng.random_range(1..=max_dim),
        },
        "Histogram" => EditOp::Histogram,
        "Brightness" => brightness(rng),
        "BlackWhite" | "B&W" => EditOp::BlackWhite,
        "Sepia" => EditOp::Sepia,
        "Invert" => EditOp::Invert,
        "Solarize" => EditOp::Solarize {
            threshold: rng.random_range(0..=256),
        },
        "Posterize" => EditOp::Posterize {
            bits: rng.random_range(1..=8),
        },
        "Crop" => {
            let x0 = rng.random_range(0..w);
            let y0 = rng.random_range(0..h);
            EditOp::Crop {
                region: Region::new(x0, y0, rng.random_range(1..=w - x0), rng.random_range(1..=h - y0)),
            }
        }
        "Text" => EditOp::Text {
            origin: (rng.random_range(-8..w as i64 + 2), rng.random_range(-8..h as i64 + 2)),
            text: text(rng),
            scale: rng.random_range(1..=3),
            color: pixel(rng),
        },
        "Reset" => EditOp::Reset,
        "Brush" => brush(rng, w, h, 4, 4),
        "New" => EditOp::New {
            width: rng.random_range(1..=max_dim),
            height: rng.random_range(1..=max_dim),
            fill: pixel(rng),
        },
        "Import" => {
            let (iw, ih) = (rng.random_range(1..=max_dim), rng.random_range(1..=max_dim));
            import(rng, iw, ih)
        }
        other => panic!("unknown kind {other}"),
    }
}

/// Any operation, with dimension-changing kinds made rare so histories keep
/// a workable canvas.
pub fn any_op(rng: &mut Rng8, w: u32, h: u32, max_dim: u32) -> EditOp {
    const COMMON: [&str; 11] = [
        "Mirror", "Flip", "Histogram", "Brightness", "B&W", "Sepia", "Invert", "Solarize", "Posterize", "Text", "Brush",
    ];
    const RARE: [&str; 6] = ["Transpose", "Scale", "Crop", "Reset", "New", "Import"];
    let kind = if rng.random_range(0..10) == 0 {
        RARE[rng.random_range(0..RARE.len())]
    } else {
        COMMON[rng.random_range(0..COMMON.len())]
    };
    op_of_kind(rng, kind, w, h, max_dim)
}

/// Linear history of `len` operations on a `w x h` imported canvas.
pub fn linear_history(seed: u64, len: usize, w: u32, h: u32) -> RevisionDag {
    let mut rng = rng(seed);
    let root = import(&mut rng, w, h);
    let mut dag = RevisionDag::create_root(root, "gen", Timestamp::from_micros(1)).unwrap();
    let mut head = NodeId::ROOT;
    for _ in 0..len {
        let (cw, ch) = dag.dimensions(head).unwrap();
        let op = any_op(&mut rng, cw, ch, w.max(h) + w.max(h) / 4);
        head = dag.append_node(head, op, "gen", Timestamp::EPOCH, None).unwrap();
    }
    dag
}

/// Random graph: branches off arbitrary nodes, notes, several authors and
/// merges where the two sides agree on dimensions.
pub fn random_graph(seed: u64, nodes: usize, max_dim: u32) -> RevisionDag {
    let mut rng = rng(seed);
    let (w, h) = (rng.random_range(1..=max_dim), rng.random_range(1..=max_dim));
    let root = if rng.random() {
        import(&mut rng, w, h)
    } else {
        EditOp::New {
            width: w,
            height: h,
            fill: pixel(&mut rng),
        }
    };
    let authors = ["ada", "bo", "cy, the \"third\""];
    let mut dag = RevisionDag::create_root(root, authors[0], Timestamp::from_micros(rng.random_range(0..1 << 40))).unwrap();
    while dag.len() < nodes {
        let author = authors[rng.random_range(0..authors.len())];
        let ts = Timestamp::from_micros(rng.random_range(0..1 << 40));
        if dag.len() > 2 && rng.random_range(0..6) == 0 {
            let a = NodeId(rng.random_range(0..dag.len() as u64));
            let b = NodeId(rng.random_range(0..dag.len() as u64));
            if a != b {
                let _ = merge_revisions(&mut dag, a, b, author, ts);
            }
            continue;
        }
        let parent = if rng.random() {
            dag.latest_head()
        } else {
            NodeId(rng.random_range(0..dag.len() as u64))
        };
        let (cw, ch) = dag.dimensions(parent).unwrap();
        let op = any_op(&mut rng, cw, ch, max_dim);
        let note = match rng.random_range(0..4) {
            0 => Some(format!("note {}, with \"quotes\"\nand a newline", dag.len())),
            1 => Some("draft".to_string()),
            _ => None,
        };
        dag.append_node(parent, op, author, ts, note).unwrap();
    }
    dag
}
