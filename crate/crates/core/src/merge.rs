//! Per-pixel merge of two revisions against their lowest common ancestor,
//! with latest-wins resolution of conflicting pixels.

use std::collections::BTreeSet;

use crate::dag::{NodeId, RevisionDag};
use crate::error::{Error, Result};
use crate::raster::{Pixel, RasterImage};
use crate::timestamp::Timestamp;

/// Where a merged pixel came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Neither side changed it.
    Base,
    Left,
    Right,
    /// Both sides changed it differently; left's change is newer.
    ConflictLeft,
    /// Both sides changed it differently; right's change is newer.
    ConflictRight,
}

impl Provenance {
    pub fn is_conflict(self) -> bool {
        matches!(self, Provenance::ConflictLeft | Provenance::ConflictRight)
    }

    pub fn name(self) -> &'static str {
        match self {
            Provenance::Base => "base",
            Provenance::Left => "left",
            Provenance::Right => "right",
            Provenance::ConflictLeft => "conflict-left",
            Provenance::ConflictRight => "conflict-right",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeResult {
    pub image: RasterImage,
    pub base: NodeId,
    pub left: NodeId,
    pub right: NodeId,
    /// Row-major, same size as `image`.
    pub provenance: Vec<Provenance>,
    pub conflict_count: usize,
}

impl MergeResult {
    pub fn provenance_at(&self, x: u32, y: u32) -> Provenance {
        self.provenance[y as usize * self.image.width() as usize + x as usize]
    }
}

/// For every pixel of a `width x height` grid, the newest timestamp among
/// the operations on `side`'s history since `base` whose footprint covers it.
fn latest_cover(
    dag: &RevisionDag,
    side: NodeId,
    base_ancestors: &BTreeSet<NodeId>,
    width: u32,
    height: u32,
) -> Result<Vec<Option<Timestamp>>> {
    let mut grid = vec![None; width as usize * height as usize];
    for id in dag.ancestors(side)?.difference(base_ancestors) {
        let ts = dag.node(*id)?.timestamp;
        let Some(region) = dag.footprint(*id)? else { continue };
        let y_end = region.y1().min(height as u64) as u32;
        let x_end = region.x1().min(width as u64) as u32;
        for y in region.y0..y_end {
            for x in region.x0..x_end {
                let slot = &mut grid[y as usize * width as usize + x as usize];
                *slot = (*slot).max(Some(ts));
            }
        }
    }
    Ok(grid)
}

/// Computes the merge of `left` and `right` without modifying the graph.
pub fn resolve_merge(dag: &RevisionDag, left: NodeId, right: NodeId) -> Result<MergeResult> {
    dag.node(left)?;
    dag.node(right)?;
    if left == right {
        return Err(Error::DegenerateMerge(left));
    }
    let base = dag.lowest_common_ancestor(left, right)?;
    let l = dag.replay_shared(left)?;
    let r = dag.replay_shared(right)?;
    if l.dims() != r.dims() {
        return Err(Error::MergeShape(l.width(), l.height(), r.width(), r.height()));
    }
    let b = dag.replay_shared(base)?;
    // A base of a different size carries no usable per-coordinate value, so
    // every pixel counts as changed on both sides.
    let base_pixels: Option<&[Pixel]> = (b.dims() == l.dims()).then(|| b.pixels());
    let (w, h) = l.dims();
    let base_ancestors = dag.ancestors(base)?;
    let left_cover = latest_cover(dag, left, &base_ancestors, w, h)?;
    let right_cover = latest_cover(dag, right, &base_ancestors, w, h)?;

    let mut pixels = Vec::with_capacity(l.pixels().len());
    let mut provenance = Vec::with_capacity(l.pixels().len());
    for i in 0..l.pixels().len() {
        let (lp, rp) = (l.pixels()[i], r.pixels()[i]);
        let bp = base_pixels.map(|b| b[i]);
        let (value, tag) = if lp == rp {
            (lp, if bp == Some(lp) { Provenance::Base } else { Provenance::Left })
        } else if bp == Some(lp) {
            (rp, Provenance::Right)
        } else if bp == Some(rp) {
            (lp, Provenance::Left)
        } else if right_cover[i] > left_cover[i] {
            (rp, Provenance::ConflictRight)
        } else {
            (lp, Provenance::ConflictLeft)
        };
        pixels.push(value);
        provenance.push(tag);
    }
    let conflict_count = provenance.iter().filter(|p| p.is_conflict()).count();
    Ok(MergeResult {
        image: RasterImage::from_pixels(w, h, pixels)?,
        base,
        left,
        right,
        provenance,
        conflict_count,
    })
}

/// Merges `left` and `right` and records the result as a new node with
/// parents `[left, right]`.
pub fn merge_revisions(
    dag: &mut RevisionDag,
    left: NodeId,
    right: NodeId,
    author: &str,
    timestamp: Timestamp,
) -> Result<(MergeResult, NodeId)> {
    let result = resolve_merge(dag, left, right)?;
    let id = dag.append_merge(left, right, result.image.clone(), author, timestamp)?;
    Ok((result, id))
}
