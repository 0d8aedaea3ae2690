//! On-disk project layout and the bridge to the external version-control
//! tool.
//!
//! ```text
//! Project.properties   project metadata (key=value)
//! dag.json             graph structure, rewritten atomically
//! nodes.csv            one row per node
//! deltas/<id>.csv      the node's operation (or merged pixels)
//! thumbs/<id>.png      node thumbnails
//! milestones/rev<k>.*  committed revision images, plus index.csv
//! .imgvc.lock          writer lock
//! ```
//!
//! `dag.json` is the commit point of every write: rows or delta files with
//! ids beyond its last node are leftovers of an interrupted append and are
//! ignored on load.

pub mod backend;
pub mod format;
pub mod lfs;
mod lock;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::dag::{DagNode, NodeId, RevisionDag};
use crate::edit::EditOp;
use crate::error::{Error, Result};
use crate::raster::{ops, ImageFormat, Pixel, RasterImage};
use crate::timestamp::Timestamp;

pub use backend::{FakeBackend, GitCli, VcsBackend};
pub use format::{MilestoneEntry, NodeHeader, Properties};
pub use lfs::{make_lfs_pointer, LfsPointer};
pub use lock::WriterLock;

pub const PROPERTIES_FILE: &str = "Project.properties";
pub const DAG_FILE: &str = "dag.json";
pub const NODES_FILE: &str = "nodes.csv";
pub const DELTAS_DIR: &str = "deltas";
pub const THUMBS_DIR: &str = "thumbs";
pub const MILESTONES_DIR: &str = "milestones";
pub const MILESTONE_INDEX: &str = "milestones/index.csv";
pub const LOCK_FILE: &str = ".imgvc.lock";
const GITIGNORE: &str = ".gitignore";

/// Longest side of a node thumbnail.
pub const THUMBNAIL_MAX: u32 = 96;

pub fn delta_path(id: NodeId) -> String {
    format!("{DELTAS_DIR}/{id}.csv")
}

pub fn milestone_path(rev: u32, format: ImageFormat) -> String {
    format!("{MILESTONES_DIR}/rev{rev}.{format}")
}

/// Parameters of a new project.
#[derive(Clone, Debug)]
pub struct InitOptions {
    pub name: String,
    pub author: String,
    pub format: ImageFormat,
    /// Explicit root operation; takes precedence over `source_image`.
    pub root_op: Option<EditOp>,
    /// Encoded image to import as the root; a blank canvas otherwise.
    pub source_image: Option<Vec<u8>>,
    pub remote_url: Option<String>,
    pub canvas: (u32, u32),
    pub fill: Pixel,
    pub timestamp: Timestamp,
}

impl InitOptions {
    pub fn new(name: impl Into<String>, author: impl Into<String>, format: ImageFormat) -> Self {
        InitOptions {
            name: name.into(),
            author: author.into(),
            format,
            root_op: None,
            source_image: None,
            remote_url: None,
            canvas: (256, 256),
            fill: Pixel::WHITE,
            timestamp: Timestamp::now(),
        }
    }
}

/// What `pull` found on the remote.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PullReport {
    /// Remote and local histories are identical, or the remote is empty.
    UpToDate,
    /// Local history has nodes the remote lacks; nothing to pull.
    LocalAhead,
    /// The remote strictly extended the local history.
    FastForward { new_nodes: Vec<NodeId> },
    /// Both sides recorded different nodes after `common` shared ones.
    MergeNeeded {
        common: usize,
        local_heads: Vec<NodeId>,
        remote_heads: Vec<NodeId>,
    },
}

/// Result of checking one committed milestone against replay.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MilestoneCheck {
    Matches,
    /// JPEG milestones cannot be compared bitwise.
    Lossy,
    /// The file is a Git LFS pointer whose content is not checked out.
    PointerOnly(LfsPointer),
    Differs,
}

#[derive(Debug)]
pub struct ProjectStore {
    root: PathBuf,
    pub properties: Properties,
    /// `nodes.csv` has rows past the last committed node and must be
    /// rewritten before the next append.
    nodes_csv_stale: bool,
    /// Rendered `dag.json` objects by node id, with the note they were
    /// rendered with. Everything else about a node is immutable.
    json_cache: Vec<(Option<String>, Vec<u8>)>,
}

fn read_opt(path: &Path) -> Result<Option<Vec<u8>>> {
    match fs::read(path) {
        Ok(b) => Ok(Some(b)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Writes to a sibling temp file, then renames over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Downscaled copy whose longest side is at most [`THUMBNAIL_MAX`].
pub fn thumbnail(img: &RasterImage) -> RasterImage {
    let (w, h) = img.dims();
    let longest = w.max(h);
    if longest <= THUMBNAIL_MAX {
        return img.clone();
    }
    let scaled = |v: u32| ((v as u64 * THUMBNAIL_MAX as u64) / longest as u64).max(1) as u32;
    ops::scale(img, scaled(w), scaled(h)).expect("thumbnail dimensions are positive")
}

/// Creates a project in `dir`, which must be absent, empty, or hold only a
/// `.git` directory.
pub fn init_project(dir: &Path, mut opts: InitOptions) -> Result<(ProjectStore, RevisionDag)> {
    if dir.exists() {
        let occupied = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok())
            .any(|e| e.file_name() != ".git");
        if occupied {
            return Err(Error::AlreadyInitialized(dir.to_path_buf()));
        }
    }
    let root_op = match (opts.root_op.take(), &opts.source_image) {
        (Some(op), _) => op,
        (None, Some(bytes)) => EditOp::import(bytes, ImageFormat::detect(bytes)?)?,
        (None, None) => EditOp::New {
            width: opts.canvas.0,
            height: opts.canvas.1,
            fill: opts.fill,
        },
    };
    let dag = RevisionDag::create_root(root_op, opts.author.clone(), opts.timestamp)?;
    for sub in [DELTAS_DIR, THUMBS_DIR, MILESTONES_DIR] {
        create_dir(&dir.join(sub))?;
    }
    let properties = Properties {
        name: opts.name,
        author: opts.author,
        created: opts.timestamp,
        format: opts.format,
        remote: opts.remote_url.filter(|r| !r.is_empty()),
    };
    let mut store = ProjectStore {
        root: dir.to_path_buf(),
        properties,
        nodes_csv_stale: false,
        json_cache: Vec::new(),
    };
    let props_path = dir.join(PROPERTIES_FILE);
    fs::write(&props_path, store.properties.render()).map_err(|e| Error::io(&props_path, e))?;
    let nodes_path = dir.join(NODES_FILE);
    fs::write(&nodes_path, format::render_nodes_header()).map_err(|e| Error::io(&nodes_path, e))?;
    store.persist_node(&dag, NodeId::ROOT)?;
    Ok((store, dag))
}

struct LoadedLogs {
    properties: Properties,
    dag: RevisionDag,
    uncommitted_rows: bool,
}

/// Reads and cross-checks the three logs through `read`. When `listed`
/// names the delta files present, stray ones are reported too.
fn load_logs(
    read: impl Fn(&str) -> Result<Option<Vec<u8>>>,
    listed: Option<BTreeSet<NodeId>>,
) -> Result<LoadedLogs> {
    let required = |rel: &str| {
        read(rel)?.ok_or_else(|| Error::CorruptFile(format!("{rel} is missing")))
    };
    let properties = Properties::parse(&String::from_utf8_lossy(&required(PROPERTIES_FILE)?))?;
    let doc = format::parse_dag_json(&required(DAG_FILE)?)?;
    let rows = format::parse_nodes_csv(&required(NODES_FILE)?)?;

    let committed = doc.nodes.iter().map(|n| n.id).max();
    let within = |id: &NodeId| committed.is_some_and(|c| *id <= c);
    let uncommitted_rows = rows.iter().any(|r| !within(&r.id));
    let mut ids: BTreeSet<NodeId> = doc.nodes.iter().map(|n| n.id).collect();
    ids.extend(rows.iter().map(|r| r.id).filter(within));
    if let Some(listed) = &listed {
        ids.extend(listed.iter().copied().filter(within));
    }
    let corrupt = |node: NodeId, reason: String| Error::CorruptStore { node, reason };

    let mut nodes = Vec::with_capacity(doc.nodes.len());
    let last = committed.map_or(0, |c| c.0 + 1);
    for id in (0..last).map(NodeId) {
        let in_doc: Vec<_> = doc.nodes.iter().filter(|n| n.id == id).collect();
        let in_csv: Vec<_> = rows.iter().filter(|r| r.id == id).collect();
        let header = match in_doc.as_slice() {
            [h] => *h,
            [] => return Err(corrupt(id, "missing from dag.json".into())),
            _ => return Err(corrupt(id, "listed twice in dag.json".into())),
        };
        match in_csv.as_slice() {
            [row] => {
                if let Some(field) = header.first_difference(row) {
                    return Err(corrupt(id, format!("nodes.csv and dag.json disagree on {field}")));
                }
            }
            [] => return Err(corrupt(id, "missing from nodes.csv".into())),
            _ => return Err(corrupt(id, "listed twice in nodes.csv".into())),
        }
        let rel = delta_path(id);
        if listed.as_ref().is_some_and(|l| !l.contains(&id)) {
            return Err(corrupt(id, format!("{rel} is missing")));
        }
        let bytes = read(&rel)?.ok_or_else(|| corrupt(id, format!("{rel} is missing")))?;
        let action = format::parse_delta(&bytes).map_err(|e| corrupt(id, format!("{rel}: {e}")))?;
        if action.kind() != header.kind {
            return Err(corrupt(id, format!("{rel} holds {} but dag.json says {}", action.kind(), header.kind)));
        }
        if header.params.as_ref() != Some(&format::summary_params(&action)) {
            return Err(corrupt(id, format!("{rel} parameters disagree with dag.json")));
        }
        nodes.push(DagNode {
            id,
            action,
            parents: header.parents.clone(),
            author: header.author.clone(),
            timestamp: header.timestamp,
            note: header.note.clone(),
            thumbnail: header.thumbnail.clone(),
        });
    }
    debug_assert!(ids.iter().all(|id| id.0 < last));
    let dag = RevisionDag::from_nodes(nodes)?;
    for head in dag.heads() {
        dag.replay(head).map_err(|e| corrupt(head, format!("replay failed: {e}")))?;
    }
    Ok(LoadedLogs {
        properties,
        dag,
        uncommitted_rows,
    })
}

/// Opens the project in `dir`, verifying that all logs agree and that every
/// head replays.
pub fn load_project(dir: &Path) -> Result<(ProjectStore, RevisionDag)> {
    if !dir.join(PROPERTIES_FILE).is_file() {
        return Err(Error::InvalidArgument(format!(
            "{} is not a project (no {PROPERTIES_FILE})",
            dir.display()
        )));
    }
    let deltas_dir = dir.join(DELTAS_DIR);
    let mut listed = BTreeSet::new();
    if deltas_dir.is_dir() {
        for entry in fs::read_dir(&deltas_dir).map_err(|e| Error::io(&deltas_dir, e))? {
            let entry = entry.map_err(|e| Error::io(&deltas_dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".csv").and_then(|s| s.parse().ok()) {
                listed.insert(NodeId(id));
            }
        }
    }
    let loaded = load_logs(|rel| read_opt(&dir.join(rel)), Some(listed))?;
    Ok((
        ProjectStore {
            root: dir.to_path_buf(),
            properties: loaded.properties,
            nodes_csv_stale: loaded.uncommitted_rows,
            json_cache: Vec::new(),
        },
        loaded.dag,
    ))
}

impl ProjectStore {
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn lock(&self) -> Result<WriterLock> {
        WriterLock::acquire(&self.root)
    }

    /// Writes node `id`'s delta and thumbnail, appends its `nodes.csv` row,
    /// then commits it by rewriting `dag.json`.
    pub fn persist_node(&mut self, dag: &RevisionDag, id: NodeId) -> Result<()> {
        let node = dag.node(id)?;
        let delta = self.path(&delta_path(id));
        fs::write(&delta, format::render_delta(&node.action)).map_err(|e| Error::io(&delta, e))?;
        let thumb_path = self.path(&node.thumbnail);
        if let Some(parent) = thumb_path.parent() {
            create_dir(parent)?;
        }
        let thumb = thumbnail(&dag.replay(id)?).encode(ImageFormat::Png)?;
        fs::write(&thumb_path, thumb).map_err(|e| Error::io(&thumb_path, e))?;

        let nodes_path = self.path(NODES_FILE);
        if self.nodes_csv_stale {
            self.write_nodes_csv(dag)?;
        } else {
            let mut f = fs::OpenOptions::new()
                .append(true)
                .open(&nodes_path)
                .map_err(|e| Error::io(&nodes_path, e))?;
            f.write_all(&format::render_nodes_row(&NodeHeader::of(node)))
                .map_err(|e| Error::io(&nodes_path, e))?;
        }
        self.write_dag_json(dag)
    }

    fn write_nodes_csv(&mut self, dag: &RevisionDag) -> Result<()> {
        let headers: Vec<_> = dag.nodes().iter().map(NodeHeader::of).collect();
        write_atomic(&self.path(NODES_FILE), &format::render_nodes_csv(&headers))?;
        self.nodes_csv_stale = false;
        Ok(())
    }

    fn write_dag_json(&mut self, dag: &RevisionDag) -> Result<()> {
        let cache = &mut self.json_cache;
        cache.truncate(dag.len());
        for (i, node) in dag.nodes().iter().enumerate() {
            match cache.get_mut(i) {
                Some(entry) if entry.0 == node.note => {}
                Some(entry) => *entry = (node.note.clone(), format::render_dag_node(node)),
                None => cache.push((node.note.clone(), format::render_dag_node(node))),
            }
        }
        let doc = format::assemble_dag_json(&self.properties.name, cache.iter().map(|(_, b)| b.as_slice()));
        write_atomic(&self.path(DAG_FILE), &doc)
    }

    /// Rewrites `nodes.csv` and `dag.json` after node metadata changed
    /// (annotations).
    pub fn rewrite_logs(&mut self, dag: &RevisionDag) -> Result<()> {
        self.write_nodes_csv(dag)?;
        self.write_dag_json(dag)
    }

    /// Encodes `replay(head)` to `path`.
    pub fn export_image(&self, dag: &RevisionDag, head: NodeId, path: &Path, format: ImageFormat) -> Result<()> {
        let bytes = dag.replay_shared(head)?.encode(format)?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn milestones(&self) -> Result<Vec<MilestoneEntry>> {
        match read_opt(&self.path(MILESTONE_INDEX))? {
            Some(bytes) => format::parse_milestones(&bytes),
            None => Ok(Vec::new()),
        }
    }

    fn ensure_repository(&self, backend: &dyn VcsBackend) -> Result<()> {
        if backend.is_repo(&self.root)? {
            return Ok(());
        }
        backend.init(&self.root)?;
        let ignore = self.path(GITIGNORE);
        if !ignore.exists() {
            fs::write(&ignore, format!("{LOCK_FILE}\n*.tmp\n")).map_err(|e| Error::io(&ignore, e))?;
        }
        if let Some(url) = &self.properties.remote {
            backend.add_remote(&self.root, url)?;
        }
        Ok(())
    }

    const TRACKED: [&'static str; 6] = [GITIGNORE, PROPERTIES_FILE, DAG_FILE, NODES_FILE, DELTAS_DIR, THUMBS_DIR];

    /// Exports `replay(head)` as the next milestone and commits it together
    /// with the logs. Returns the 0-based revision number.
    pub fn commit_milestone(
        &self,
        dag: &RevisionDag,
        head: NodeId,
        message: &str,
        author: &str,
        backend: &dyn VcsBackend,
    ) -> Result<u32> {
        dag.node(head)?;
        self.ensure_repository(backend)?;
        let mut entries = self.milestones()?;
        backend.add(&self.root, &Self::TRACKED)?;
        let logs_changed = backend.has_staged_changes(&self.root)?;
        if !logs_changed && entries.last().is_some_and(|e| e.node == head) {
            return Err(Error::EmptyCommit);
        }
        let rev = entries.len() as u32;
        let format = self.properties.format;
        let rel = milestone_path(rev, format);
        create_dir(&self.path(MILESTONES_DIR))?;
        self.export_image(dag, head, &self.path(&rel), format)?;
        entries.push(MilestoneEntry {
            rev,
            node: head,
            message: message.to_string(),
        });
        write_atomic(&self.path(MILESTONE_INDEX), &format::render_milestones(&entries))?;
        backend.add(&self.root, &[MILESTONES_DIR])?;
        backend.commit(&self.root, message, author)?;
        Ok(rev)
    }

    /// Checks every committed milestone against the replay of its node.
    pub fn verify_milestones(&self, dag: &RevisionDag) -> Result<Vec<(MilestoneEntry, MilestoneCheck)>> {
        let format = self.properties.format;
        self.milestones()?
            .into_iter()
            .map(|entry| {
                let rel = milestone_path(entry.rev, format);
                let bytes = read_opt(&self.path(&rel))?
                    .ok_or_else(|| Error::CorruptFile(format!("{rel} is missing")))?;
                let check = if let Some(ptr) = LfsPointer::sniff(&bytes) {
                    MilestoneCheck::PointerOnly(ptr)
                } else if !format.is_lossless() {
                    MilestoneCheck::Lossy
                } else if RasterImage::decode(&bytes, format)? == *dag.replay_shared(entry.node)? {
                    MilestoneCheck::Matches
                } else {
                    MilestoneCheck::Differs
                };
                Ok((entry, check))
            })
            .collect()
    }

    pub fn push(&self, backend: &dyn VcsBackend) -> Result<()> {
        if self.properties.remote.is_none() {
            return Err(Error::NoRemote);
        }
        self.ensure_repository(backend)?;
        backend.push(&self.root)
    }

    /// Fetches the remote history and compares it with `local`. The work
    /// tree is only updated for a fast-forward; the caller then reloads.
    pub fn pull(&self, local: &RevisionDag, backend: &dyn VcsBackend) -> Result<PullReport> {
        if self.properties.remote.is_none() {
            return Err(Error::NoRemote);
        }
        self.ensure_repository(backend)?;
        if !backend.fetch(&self.root)? {
            return Ok(PullReport::UpToDate);
        }
        let remote = load_logs(|rel| backend.remote_file(&self.root, rel), None)?.dag;
        let common = local
            .nodes()
            .iter()
            .zip(remote.nodes())
            .take_while(|(a, b)| a == b)
            .count();
        let report = if common == local.len() && common == remote.len() {
            PullReport::UpToDate
        } else if common == local.len() {
            backend.pull(&self.root)?;
            PullReport::FastForward {
                new_nodes: remote.nodes()[common..].iter().map(|n| n.id).collect(),
            }
        } else if common == remote.len() {
            PullReport::LocalAhead
        } else {
            PullReport::MergeNeeded {
                common,
                local_heads: local.heads().into_iter().collect(),
                remote_heads: remote.heads().into_iter().collect(),
            }
        };
        Ok(report)
    }
}
