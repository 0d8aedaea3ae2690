//! Semantic diffs between revisions and pixel comparison of states.

use std::sync::{Arc, OnceLock};

use crate::dag::{NodeId, RevisionDag};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Per-pixel comparison of two equally sized images.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelDelta {
    pub width: u32,
    pub height: u32,
    pub count: usize,
    /// Row-major; `true` where any channel differs.
    pub mask: Vec<bool>,
}

impl PixelDelta {
    /// Run-length encoding of the mask as alternating run lengths, starting
    /// with a (possibly empty) run of unchanged pixels.
    pub fn mask_runs(&self) -> Vec<usize> {
        run_lengths(&self.mask)
    }
}

pub fn run_lengths(mask: &[bool]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0;
    for &m in mask {
        if m == current {
            len += 1;
        } else {
            runs.push(len);
            current = m;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

pub fn pixel_diff(a: &RasterImage, b: &RasterImage) -> Result<PixelDelta> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(a.width(), a.height(), b.width(), b.height()));
    }
    let mask: Vec<bool> = a.pixels().iter().zip(b.pixels()).map(|(p, q)| p != q).collect();
    Ok(PixelDelta {
        width: a.width(),
        height: a.height(),
        count: mask.iter().filter(|&&m| m).count(),
        mask,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffStep {
    pub node: NodeId,
    pub kind: &'static str,
    pub summary: String,
}

/// Operations between two revisions, with lazily replayed intermediate
/// states for slider playback.
pub struct DiffReport<'a> {
    dag: &'a RevisionDag,
    pub src: NodeId,
    pub dst: NodeId,
    pub steps: Vec<DiffStep>,
    states: Vec<OnceLock<Arc<RasterImage>>>,
}

impl std::fmt::Debug for DiffReport<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffReport")
            .field("src", &self.src)
            .field("dst", &self.dst)
            .field("steps", &self.steps)
            .finish_non_exhaustive()
    }
}

impl<'a> DiffReport<'a> {
    /// Number of slider positions: one per step plus the origin.
    pub fn frame_count(&self) -> usize {
        self.steps.len() + 1
    }

    /// Pixel delta between the endpoint states; `None` when the path changes
    /// the image size.
    pub fn pixel_delta(&self) -> Result<Option<PixelDelta>> {
        let a = self.frame(0)?;
        let b = self.frame(self.steps.len())?;
        match pixel_diff(&a, &b) {
            Ok(d) => Ok(Some(d)),
            Err(Error::Shape(..)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// State after the first `k` steps; `k == 0` is the source revision.
    pub fn frame(&self, k: usize) -> Result<Arc<RasterImage>> {
        let max = self.steps.len();
        if k > max {
            return Err(Error::Index { index: k, max });
        }
        if let Some(img) = self.states[k].get() {
            return Ok(Arc::clone(img));
        }
        let start = (0..k).rev().find(|&j| self.states[j].get().is_some());
        let mut state = match start {
            Some(j) => Arc::clone(self.states[j].get().expect("checked")),
            None => {
                let img = self.dag.replay_shared(self.src)?;
                Arc::clone(self.states[0].get_or_init(|| img))
            }
        };
        let root = self.dag.replay_shared(NodeId::ROOT)?;
        // Each step applies to the state produced by the previous step, which
        // differs from the node's own first parent when the path crosses a
        // merge through its second parent.
        for j in start.unwrap_or(0) + 1..=k {
            let img = Arc::new(self.dag.apply_node(self.steps[j - 1].node, &state, &root)?.image);
            state = Arc::clone(self.states[j].get_or_init(|| img));
        }
        Ok(state)
    }
}

pub fn semantic_diff(dag: &RevisionDag, src: NodeId, dst: NodeId) -> Result<DiffReport<'_>> {
    let path = dag.path_between(src, dst)?;
    let steps: Vec<DiffStep> = path
        .iter()
        .map(|&id| {
            let node = dag.node(id)?;
            Ok(DiffStep {
                node: id,
                kind: node.kind(),
                summary: node.action.summary(),
            })
        })
        .collect::<Result<_>>()?;
    let states = (0..=steps.len()).map(|_| OnceLock::new()).collect();
    Ok(DiffReport {
        dag,
        src,
        dst,
        steps,
        states,
    })
}

/// Slider frame `k` of `report`.
pub fn render_diff_frame(report: &DiffReport<'_>, k: usize) -> Result<Arc<RasterImage>> {
    report.frame(k)
}
