//! The revision graph: nodes record editing operations, edges point from a
//! node to the state it was applied on, and any node's image is rebuilt by
//! replaying its lineage from the root.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use crate::edit::{apply_edit, Applied, EditOp};
use crate::error::{Error, Result};
use crate::raster::{RasterImage, Region};
use crate::timestamp::Timestamp;

/// Dense node number, assigned in creation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u64);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for NodeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse()
            .map(NodeId)
            .map_err(|_| Error::InvalidArgument(format!("{s:?} is not a node id")))
    }
}

/// What a node contributes to the history.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeAction {
    Edit(EditOp),
    /// Result of a merge, stored as a complete pixel grid.
    Merge(Arc<RasterImage>),
}

impl NodeAction {
    pub const MERGE_KIND: &'static str = "MergeState";

    pub fn kind(&self) -> &'static str {
        match self {
            NodeAction::Edit(op) => op.kind(),
            NodeAction::Merge(_) => Self::MERGE_KIND,
        }
    }

    pub fn summary(&self) -> String {
        match self {
            NodeAction::Edit(op) => op.summary(),
            NodeAction::Merge(img) => format!("{} {}x{}", Self::MERGE_KIND, img.width(), img.height()),
        }
    }

    pub fn as_edit(&self) -> Option<&EditOp> {
        match self {
            NodeAction::Edit(op) => Some(op),
            NodeAction::Merge(_) => None,
        }
    }

    /// Whether the node's state is independent of its parents' states.
    fn is_full_state(&self) -> bool {
        match self {
            NodeAction::Edit(op) => op.is_initializer(),
            NodeAction::Merge(_) => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DagNode {
    pub id: NodeId,
    pub action: NodeAction,
    /// Empty for the root, two entries for merges, one otherwise.
    pub parents: Vec<NodeId>,
    pub author: String,
    pub timestamp: Timestamp,
    pub note: Option<String>,
    pub thumbnail: String,
}

impl DagNode {
    pub fn kind(&self) -> &'static str {
        self.action.kind()
    }

    pub fn is_merge(&self) -> bool {
        matches!(self.action, NodeAction::Merge(_))
    }

    pub fn thumbnail_path(id: NodeId) -> String {
        format!("thumbs/{id}.png")
    }
}

const CACHE_CAPACITY: usize = 64;

#[derive(Default)]
struct ReplayCache {
    images: HashMap<NodeId, Arc<RasterImage>>,
    order: VecDeque<NodeId>,
}

impl ReplayCache {
    fn get(&self, id: NodeId) -> Option<Arc<RasterImage>> {
        self.images.get(&id).cloned()
    }

    fn put(&mut self, id: NodeId, img: Arc<RasterImage>) {
        if self.images.insert(id, img).is_none() {
            self.order.push_back(id);
            if self.order.len() > CACHE_CAPACITY {
                if let Some(old) = self.order.pop_front() {
                    self.images.remove(&old);
                }
            }
        }
    }
}

/// The acyclic history graph of a project.
///
/// Mutations take `&mut self`, so a single writer is enforced by the borrow
/// checker; replay and queries only need `&self` and may run concurrently.
pub struct RevisionDag {
    nodes: Vec<DagNode>,
    cache: Mutex<ReplayCache>,
}

impl Clone for RevisionDag {
    fn clone(&self) -> Self {
        RevisionDag {
            nodes: self.nodes.clone(),
            cache: Mutex::default(),
        }
    }
}

impl PartialEq for RevisionDag {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl Eq for RevisionDag {}

impl fmt::Debug for RevisionDag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RevisionDag").field("nodes", &self.nodes).finish()
    }
}

impl RevisionDag {
    /// Starts a history with a New or Import node as node 0.
    pub fn create_root(op: EditOp, author: impl Into<String>, timestamp: Timestamp) -> Result<Self> {
        if !op.is_initializer() {
            return Err(Error::InvalidRoot(op.kind()));
        }
        op.validate(1, 1)?;
        Ok(RevisionDag {
            nodes: vec![DagNode {
                id: NodeId::ROOT,
                action: NodeAction::Edit(op),
                parents: Vec::new(),
                author: author.into(),
                timestamp,
                note: None,
                thumbnail: DagNode::thumbnail_path(NodeId::ROOT),
            }],
            cache: Mutex::default(),
        })
    }

    /// Rebuilds a graph from stored nodes, checking every structural
    /// invariant.
    pub fn from_nodes(mut nodes: Vec<DagNode>) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        let corrupt = |node: NodeId, reason: String| Error::CorruptStore { node, reason };
        if nodes.is_empty() {
            return Err(Error::CorruptFile("history has no nodes".into()));
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.id.index() != i {
                return Err(corrupt(NodeId(i as u64), "node ids are not dense".into()));
            }
            let expected_parents = match (&node.action, i) {
                (NodeAction::Edit(op), 0) if op.is_initializer() => 0,
                (_, 0) => return Err(corrupt(node.id, format!("root kind {} cannot initialize", node.kind()))),
                (NodeAction::Merge(_), _) => 2,
                (NodeAction::Edit(_), _) => 1,
            };
            if node.parents.len() != expected_parents {
                return Err(corrupt(
                    node.id,
                    format!("{} node has {} parents", node.kind(), node.parents.len()),
                ));
            }
            for p in &node.parents {
                if *p >= node.id {
                    return Err(corrupt(node.id, format!("parent {p} does not precede it")));
                }
                if nodes[p.index()].timestamp > node.timestamp {
                    return Err(corrupt(node.id, format!("timestamp precedes parent {p}")));
                }
            }
        }
        Ok(RevisionDag {
            nodes,
            cache: Mutex::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[DagNode] {
        &self.nodes
    }

    pub fn root(&self) -> &DagNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: NodeId) -> Result<&DagNode> {
        self.nodes.get(id.index()).ok_or(Error::MissingNode(id))
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    /// Nodes that no other node names as a parent.
    pub fn heads(&self) -> BTreeSet<NodeId> {
        let mut has_child = vec![false; self.nodes.len()];
        for n in &self.nodes {
            for p in &n.parents {
                has_child[p.index()] = true;
            }
        }
        self.nodes
            .iter()
            .filter(|n| !has_child[n.id.index()])
            .map(|n| n.id)
            .collect()
    }

    /// The most recently created head.
    pub fn latest_head(&self) -> NodeId {
        *self.heads().last().expect("a non-empty DAG has a head")
    }

    pub fn children(&self, id: NodeId) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| n.parents.contains(&id))
            .map(|n| n.id)
            .collect()
    }

    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.nodes
            .iter()
            .flat_map(|n| n.parents.iter().map(move |p| (*p, n.id)))
            .collect()
    }

    /// Timestamp to record for a new node: never earlier than requested and
    /// strictly later than every existing node.
    fn issue_timestamp(&self, requested: Timestamp) -> Timestamp {
        let last = self.nodes.iter().map(|n| n.timestamp).max().unwrap_or(Timestamp::EPOCH);
        requested.max(last.next_micro())
    }

    fn next_id(&self) -> NodeId {
        NodeId(self.nodes.len() as u64)
    }

    /// Records `op` as applied on top of `parent`. Appending to a node that
    /// already has children starts a branch.
    pub fn append_node(
        &mut self,
        parent: NodeId,
        op: EditOp,
        author: impl Into<String>,
        timestamp: Timestamp,
        note: Option<String>,
    ) -> Result<NodeId> {
        let (w, h) = self.dimensions(parent)?;
        op.validate(w, h)?;
        let id = self.next_id();
        let timestamp = self.issue_timestamp(timestamp);
        self.nodes.push(DagNode {
            id,
            action: NodeAction::Edit(op),
            parents: vec![parent],
            author: author.into(),
            timestamp,
            note: note.filter(|n| !n.is_empty()),
            thumbnail: DagNode::thumbnail_path(id),
        });
        Ok(id)
    }

    /// Records a merge of `left` and `right` whose result is `image`.
    pub fn append_merge(
        &mut self,
        left: NodeId,
        right: NodeId,
        image: RasterImage,
        author: impl Into<String>,
        timestamp: Timestamp,
    ) -> Result<NodeId> {
        self.node(left)?;
        self.node(right)?;
        if left == right {
            return Err(Error::DegenerateMerge(left));
        }
        let id = self.next_id();
        let timestamp = self.issue_timestamp(timestamp);
        let image = Arc::new(image);
        self.cache.lock().unwrap().put(id, Arc::clone(&image));
        self.nodes.push(DagNode {
            id,
            action: NodeAction::Merge(image),
            parents: vec![left, right],
            author: author.into(),
            timestamp,
            note: None,
            thumbnail: DagNode::thumbnail_path(id),
        });
        Ok(id)
    }

    pub fn set_note(&mut self, id: NodeId, note: Option<String>) -> Result<()> {
        let idx = self.node(id)?.id.index();
        self.nodes[idx].note = note.filter(|n| !n.is_empty());
        Ok(())
    }

    /// First-parent chain from the root to `head`, inclusive.
    pub fn lineage(&self, head: NodeId) -> Result<Vec<NodeId>> {
        let mut chain = vec![self.node(head)?.id];
        let mut cur = head;
        while let Some(&p) = self.nodes[cur.index()].parents.first() {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        Ok(chain)
    }

    /// Nodes from the nearest self-contained state (root, import, new
    /// canvas, or merge) up to `head`, following first parents.
    fn replay_chain(&self, head: NodeId) -> Result<Vec<NodeId>> {
        let mut chain = vec![self.node(head)?.id];
        let mut cur = head;
        while !self.nodes[cur.index()].action.is_full_state() {
            cur = self.nodes[cur.index()].parents[0];
            chain.push(cur);
        }
        chain.reverse();
        Ok(chain)
    }

    /// Size of the image at `id`, derived without touching pixels.
    pub fn dimensions(&self, id: NodeId) -> Result<(u32, u32)> {
        let root_dims = self.full_state_dims(NodeId::ROOT);
        let chain = self.replay_chain(id)?;
        let mut dims = self.full_state_dims(chain[0]);
        for n in &chain[1..] {
            if let NodeAction::Edit(op) = &self.nodes[n.index()].action {
                dims = op.output_dims(dims.0, dims.1, root_dims);
            }
        }
        Ok(dims)
    }

    fn full_state_dims(&self, id: NodeId) -> (u32, u32) {
        match &self.nodes[id.index()].action {
            NodeAction::Merge(img) => img.dims(),
            NodeAction::Edit(op) => op.output_dims(1, 1, (1, 1)),
        }
    }

    fn root_image(&self) -> Result<Arc<RasterImage>> {
        if let Some(img) = self.cache.lock().unwrap().get(NodeId::ROOT) {
            return Ok(img);
        }
        let img = Arc::new(self.full_state(NodeId::ROOT)?);
        self.cache.lock().unwrap().put(NodeId::ROOT, Arc::clone(&img));
        Ok(img)
    }

    fn full_state(&self, id: NodeId) -> Result<RasterImage> {
        match &self.nodes[id.index()].action {
            NodeAction::Merge(img) => Ok(RasterImage::clone(img)),
            NodeAction::Edit(op) => {
                // Initializers ignore their input.
                let placeholder = RasterImage::filled(1, 1, Default::default())?;
                Ok(apply_edit(&placeholder, op, &placeholder)?.image)
            }
        }
    }

    /// Applies node `id` to `input` (the state of its first parent). `root`
    /// is the project's initial image.
    pub fn apply_node(&self, id: NodeId, input: &RasterImage, root: &RasterImage) -> Result<Applied> {
        match &self.node(id)?.action {
            NodeAction::Edit(op) => apply_edit(input, op, root),
            NodeAction::Merge(img) => Ok(Applied {
                region: Some(Region::new(
                    0,
                    0,
                    img.width().max(input.width()),
                    img.height().max(input.height()),
                )),
                image: RasterImage::clone(img),
            }),
        }
    }

    /// Reconstructs the image at `head` by replaying its lineage.
    pub fn replay(&self, head: NodeId) -> Result<RasterImage> {
        self.replay_shared(head).map(|img| RasterImage::clone(&img))
    }

    /// Like [`replay`](Self::replay) but shares the cached result.
    pub fn replay_shared(&self, head: NodeId) -> Result<Arc<RasterImage>> {
        self.node(head)?;
        if let Some(img) = self.cache.lock().unwrap().get(head) {
            return Ok(img);
        }
        let root = self.root_image()?;
        let chain = self.replay_chain(head)?;
        // Resume from the latest cached state on the chain.
        let (start, mut state) = {
            let cache = self.cache.lock().unwrap();
            chain
                .iter()
                .enumerate()
                .rev()
                .find_map(|(i, n)| cache.get(*n).map(|img| (i, img)))
                .map_or((0, None), |(i, img)| (i, Some(img)))
        };
        let mut state = match state.take() {
            Some(img) => img,
            None => Arc::new(self.full_state(chain[0])?),
        };
        for &n in &chain[start + 1..] {
            state = Arc::new(self.apply_node(n, &state, &root)?.image);
        }
        self.cache.lock().unwrap().put(head, Arc::clone(&state));
        Ok(state)
    }

    /// Replay that ignores every cached state; always walks back to the
    /// nearest self-contained node.
    pub fn replay_uncached(&self, head: NodeId) -> Result<RasterImage> {
        let chain = self.replay_chain(head)?;
        let root = self.full_state(NodeId::ROOT)?;
        let mut state = self.full_state(chain[0])?;
        for &n in &chain[1..] {
            state = self.apply_node(n, &state, &root)?.image;
        }
        Ok(state)
    }

    /// All ancestors of `id`, including `id` itself.
    pub fn ancestors(&self, id: NodeId) -> Result<BTreeSet<NodeId>> {
        self.node(id)?;
        let mut seen = BTreeSet::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend(self.nodes[n.index()].parents.iter().copied());
            }
        }
        Ok(seen)
    }

    pub fn is_ancestor(&self, ancestor: NodeId, of: NodeId) -> Result<bool> {
        self.node(ancestor)?;
        Ok(self.ancestors(of)?.contains(&ancestor))
    }

    /// The common ancestor with the greatest id. The root is an ancestor of
    /// everything, so one always exists.
    pub fn lowest_common_ancestor(&self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.node(a)?;
        self.node(b)?;
        if a == b {
            return Ok(a);
        }
        // Walk both frontiers downward by id; the first id reached from both
        // sides is the greatest common ancestor.
        let mut from_a: BTreeSet<NodeId> = BTreeSet::from([a]);
        let mut from_b: BTreeSet<NodeId> = BTreeSet::from([b]);
        let mut seen_a: BTreeSet<NodeId> = BTreeSet::new();
        let mut seen_b: BTreeSet<NodeId> = BTreeSet::new();
        loop {
            let top_a = from_a.last().copied();
            let top_b = from_b.last().copied();
            let (next, is_a) = match (top_a, top_b) {
                (Some(x), Some(y)) if x >= y => (x, true),
                (Some(_), Some(y)) => (y, false),
                (Some(x), None) => (x, true),
                (None, Some(y)) => (y, false),
                (None, None) => unreachable!("root is a common ancestor"),
            };
            let (frontier, seen, other_seen) = if is_a {
                (&mut from_a, &mut seen_a, &seen_b)
            } else {
                (&mut from_b, &mut seen_b, &seen_a)
            };
            frontier.remove(&next);
            if other_seen.contains(&next) {
                return Ok(next);
            }
            seen.insert(next);
            frontier.extend(self.nodes[next.index()].parents.iter().copied());
        }
    }

    /// Nodes strictly after `src` up to and including `dst`, following
    /// parent edges (first parents preferred).
    pub fn path_between(&self, src: NodeId, dst: NodeId) -> Result<Vec<NodeId>> {
        self.node(src)?;
        self.node(dst)?;
        if src == dst {
            return Ok(Vec::new());
        }
        // Depth-first from dst; ids strictly decrease along parent edges, so
        // anything below src can be pruned.
        let mut visited = BTreeSet::new();
        let mut stack: Vec<(NodeId, usize)> = vec![(dst, 0)];
        let mut path: Vec<NodeId> = Vec::new();
        while let Some((node, depth)) = stack.pop() {
            path.truncate(depth);
            path.push(node);
            if node == src {
                path.pop();
                path.reverse();
                return Ok(path);
            }
            if !visited.insert(node) {
                continue;
            }
            for &p in self.nodes[node.index()].parents.iter().rev() {
                if p >= src {
                    stack.push((p, depth + 1));
                }
            }
        }
        Err(Error::NotAnAncestor { src, dst })
    }

    /// Rectangle touched by node `id`, evaluated on its parent's state.
    pub fn footprint(&self, id: NodeId) -> Result<Option<Region>> {
        let node = self.node(id)?;
        let Some(&parent) = node.parents.first() else {
            return Err(Error::InvalidArgument(
                "the root initializes the project and has no footprint".into(),
            ));
        };
        let (w, h) = self.dimensions(parent)?;
        Ok(match &node.action {
            NodeAction::Edit(op) => op.footprint(w, h, self.dimensions(NodeId::ROOT)?),
            NodeAction::Merge(img) => Some(Region::new(0, 0, img.width().max(w), img.height().max(h))),
        })
    }

    /// Whether the two operations touch non-overlapping rectangles.
    pub fn spatially_independent(&self, a: NodeId, b: NodeId) -> Result<bool> {
        let fa = self.footprint(a)?;
        let fb = self.footprint(b)?;
        Ok(match (fa, fb) {
            (Some(ra), Some(rb)) => !ra.intersects(&rb),
            _ => true,
        })
    }
}
