//! Seeded fixtures shared by the benchmarks.

use imgvc_core::{EditOp, Factor, NodeId, Pixel, Point, RasterImage, RevisionDag, Timestamp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn noise(rng: &mut ChaCha8Rng, w: u32, h: u32) -> RasterImage {
    RasterImage::from_fn(w, h, |_, _| Pixel::rgba(rng.random(), rng.random(), rng.random(), 255)).unwrap()
}

pub fn stroke(rng: &mut ChaCha8Rng, w: u32, h: u32) -> EditOp {
    let n = rng.random_range(1..=4);
    EditOp::Brush {
        points: (0..n).map(|_| Point::new(rng.random_range(0..w), rng.random_range(0..h))).collect(),
        radius: rng.random_range(1..=6),
        color: Pixel::rgba(rng.random(), rng.random(), rng.random(), 255),
    }
}

/// Same-size operations in roughly the mix an editing session produces.
pub fn session_op(rng: &mut ChaCha8Rng, w: u32, h: u32) -> EditOp {
    match rng.random_range(0..10) {
        0..=4 => stroke(rng, w, h),
        5 => EditOp::Brightness {
            factor: Factor::from_milli(rng.random_range(500..1500)),
        },
        6 => EditOp::Invert,
        7 => EditOp::Mirror,
        8 => EditOp::Posterize {
            bits: rng.random_range(2..=7),
        },
        _ => EditOp::Sepia,
    }
}

pub fn canvas(w: u32, h: u32) -> RevisionDag {
    let root = EditOp::New {
        width: w,
        height: h,
        fill: Pixel::WHITE,
    };
    RevisionDag::create_root(root, "bench", Timestamp::EPOCH).unwrap()
}

/// A linear history of `len` session operations.
pub fn history(seed: u64, len: usize, w: u32, h: u32) -> RevisionDag {
    let mut rng = rng(seed);
    let mut dag = canvas(w, h);
    let mut head = NodeId::ROOT;
    for _ in 0..len {
        head = dag.append_node(head, session_op(&mut rng, w, h), "bench", Timestamp::EPOCH, None).unwrap();
    }
    dag
}

/// Two branches of `len` strokes each off a shared trunk. Returns the graph
/// and the two heads.
pub fn forked(seed: u64, len: usize, w: u32, h: u32) -> (RevisionDag, NodeId, NodeId) {
    let mut rng = rng(seed);
    let mut dag = history(seed, 10, w, h);
    let trunk = dag.latest_head();
    let (mut l, mut r) = (trunk, trunk);
    for _ in 0..len {
        l = dag.append_node(l, stroke(&mut rng, w, h), "left", Timestamp::EPOCH, None).unwrap();
        r = dag.append_node(r, stroke(&mut rng, w, h), "right", Timestamp::EPOCH, None).unwrap();
    }
    (dag, l, r)
}
