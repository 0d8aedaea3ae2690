//! Fork-and-merge scenarios checked against the reference three-way merge.

use std::sync::Arc;

use imgvc_core::merge::resolve_merge;
use imgvc_core::{EditOp, ImageFormat, MergeResult, NodeId, RasterImage, RevisionDag, Timestamp};
use rand::Rng;

use super::gen::{self, Rng8};
use super::oracle::{self, Grid, Tag};

pub struct Case {
    pub root: RasterImage,
    /// Shared operations before the fork.
    pub trunk: Vec<EditOp>,
    pub left: Vec<EditOp>,
    pub right: Vec<EditOp>,
    /// Creation order of the branch nodes: `true` takes the next left op.
    pub order: Vec<bool>,
}

pub struct Outcome {
    pub dag: RevisionDag,
    pub left: NodeId,
    pub right: NodeId,
    pub engine: MergeResult,
    pub oracle: (Grid, Vec<Tag>),
}

impl Outcome {
    /// Whether the engine and the reference agree on pixels, tags and the
    /// conflict count.
    pub fn agrees(&self) -> bool {
        let (grid, tags) = &self.oracle;
        Grid::of(&self.engine.image) == *grid
            && self.engine.provenance.len() == tags.len()
            && self.engine.provenance.iter().zip(tags).all(|(p, t)| p.name() == t.name())
            && self.engine.conflict_count == tags.iter().filter(|t| t.name().starts_with("conflict")).count()
    }

    /// Every merged pixel equals the base, left or right value there.
    pub fn conserves(&self) -> bool {
        let l = self.dag.replay(self.left).unwrap();
        let r = self.dag.replay(self.right).unwrap();
        let b = self.dag.replay(self.engine.base).unwrap();
        let same_base = b.dims() == l.dims();
        self.engine.image.pixels().iter().enumerate().all(|(i, p)| {
            *p == l.pixels()[i] || *p == r.pixels()[i] || (same_base && *p == b.pixels()[i])
        })
    }
}

pub fn random_order(rng: &mut Rng8, left: usize, right: usize) -> Vec<bool> {
    let mut order = vec![true; left];
    order.extend(std::iter::repeat_n(false, right));
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    order
}

/// One operation from the merge test alphabet.
pub fn merge_op(rng: &mut Rng8, kind: usize, w: u32, h: u32) -> EditOp {
    match kind {
        0 => gen::brush(rng, w, h, 3, 2),
        1 => EditOp::Invert,
        _ => gen::brightness(rng),
    }
}

/// Builds the graph, merges the two branch heads and runs the reference.
/// Returns `None` when both branches are empty.
pub fn run(case: &Case) -> Option<Outcome> {
    let root = EditOp::Import {
        format: ImageFormat::Png,
        image: Arc::new(case.root.clone()),
    };
    let mut dag = RevisionDag::create_root(root, "base", Timestamp::from_micros(1)).unwrap();
    let mut base = NodeId::ROOT;
    for op in &case.trunk {
        base = dag.append_node(base, op.clone(), "base", Timestamp::EPOCH, None).unwrap();
    }
    let (mut l, mut r) = (base, base);
    let (mut li, mut ri) = (0, 0);
    let mut left_ops = Vec::new();
    let mut right_ops = Vec::new();
    for &take_left in &case.order {
        if take_left {
            let op = case.left[li].clone();
            li += 1;
            l = dag.append_node(l, op.clone(), "left", Timestamp::EPOCH, None).unwrap();
            left_ops.push((dag.node(l).unwrap().timestamp.as_micros(), op));
        } else {
            let op = case.right[ri].clone();
            ri += 1;
            r = dag.append_node(r, op.clone(), "right", Timestamp::EPOCH, None).unwrap();
            right_ops.push((dag.node(r).unwrap().timestamp.as_micros(), op));
        }
    }
    if l == r {
        return None;
    }
    let engine = resolve_merge(&dag, l, r).unwrap();
    let root_grid = oracle::root_grid(&dag);
    let base_grid = case.trunk.iter().fold(root_grid.clone(), |g, op| oracle::apply(op, &g, &root_grid));
    let reference = oracle::three_way(&base_grid, &root_grid, &left_ops, &right_ops);
    Some(Outcome {
        dag,
        left: l,
        right: r,
        engine,
        oracle: reference,
    })
}
