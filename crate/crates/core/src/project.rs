//! One open project: the in-memory DAG, its on-disk store and the
//! version-control backend. Both the command line and the HTTP service go
//! through this type, so the same request produces the same files.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::dag::{NodeId, RevisionDag};
use crate::diff::{semantic_diff, DiffReport};
use crate::edit::EditOp;
use crate::error::{Error, Result};
use crate::merge::{merge_revisions, MergeResult};
use crate::raster::ImageFormat;
use crate::store::{self, GitCli, InitOptions, ProjectStore, PullReport, VcsBackend, DAG_FILE};
use crate::timestamp::Timestamp;

/// Environment variable that pins the clock, for reproducible histories.
pub const CLOCK_ENV: &str = "IMGVC_TIMESTAMP";

/// Source of node timestamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clock {
    System,
    /// Every request asks for this instant; the DAG still keeps timestamps
    /// strictly increasing.
    Fixed(Timestamp),
}

impl Clock {
    /// `Fixed` when [`CLOCK_ENV`] is set, `System` otherwise.
    pub fn from_env() -> Result<Self> {
        match std::env::var(CLOCK_ENV) {
            Ok(v) if !v.trim().is_empty() => Ok(Clock::Fixed(v.trim().parse()?)),
            _ => Ok(Clock::System),
        }
    }

    pub fn now(self) -> Timestamp {
        match self {
            Clock::System => Timestamp::now(),
            Clock::Fixed(t) => t,
        }
    }
}

pub struct Project {
    store: ProjectStore,
    dag: RevisionDag,
    backend: Arc<dyn VcsBackend>,
    clock: Clock,
    /// `dag.json` as last read or written by this handle.
    seen: Vec<u8>,
}

impl std::fmt::Debug for Project {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Project")
            .field("root", &self.store.root())
            .field("nodes", &self.dag.len())
            .field("clock", &self.clock)
            .finish()
    }
}

impl Project {
    pub fn init(dir: &Path, mut opts: InitOptions, clock: Clock) -> Result<Self> {
        opts.timestamp = clock.now();
        let (store, dag) = store::init_project(dir, opts)?;
        Self::wrap(store, dag, clock)
    }

    pub fn open(dir: &Path, clock: Clock) -> Result<Self> {
        let (store, dag) = store::load_project(dir)?;
        Self::wrap(store, dag, clock)
    }

    fn wrap(store: ProjectStore, dag: RevisionDag, clock: Clock) -> Result<Self> {
        let seen = read_dag_json(&store)?;
        Ok(Project {
            store,
            dag,
            backend: Arc::new(GitCli::default()),
            clock,
            seen,
        })
    }

    pub fn with_backend(mut self, backend: Arc<dyn VcsBackend>) -> Self {
        self.backend = backend;
        self
    }

    pub fn dag(&self) -> &RevisionDag {
        &self.dag
    }

    pub fn store(&self) -> &ProjectStore {
        &self.store
    }

    pub fn root(&self) -> &Path {
        self.store.root()
    }

    pub fn name(&self) -> &str {
        &self.store.properties.name
    }

    pub fn author(&self) -> &str {
        &self.store.properties.author
    }

    pub fn format(&self) -> ImageFormat {
        self.store.properties.format
    }

    /// Runs `f` under the writer lock, after picking up changes another
    /// writer committed since this handle last looked.
    fn write<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let _lock = self.store.lock()?;
        self.refresh()?;
        let out = f(self);
        self.seen = read_dag_json(&self.store)?;
        out
    }

    /// Whether another writer has committed since this handle last looked.
    pub fn is_stale(&self) -> Result<bool> {
        Ok(read_dag_json(&self.store)? != self.seen)
    }

    /// Reloads from disk if `dag.json` changed underneath this handle.
    pub fn refresh(&mut self) -> Result<()> {
        if self.is_stale()? {
            let (store, dag) = store::load_project(self.store.root())?;
            self.store = store;
            self.dag = dag;
            self.seen = read_dag_json(&self.store)?;
        }
        Ok(())
    }

    /// Like [`refresh`](Self::refresh), but only while no writer is active,
    /// so a half-finished write is never observed. While another writer
    /// holds the lock the last consistent state stays in place.
    pub fn sync(&mut self) -> Result<()> {
        if !self.is_stale()? {
            return Ok(());
        }
        match self.store.lock() {
            Ok(_lock) => self.refresh(),
            Err(Error::LockHeld(_)) => Ok(()),
            Err(e) => Err(e),
        }
    }

    /// Applies `op` on top of `parent`, or of the most recent head.
    pub fn apply(&mut self, parent: Option<NodeId>, op: EditOp, note: Option<String>) -> Result<NodeId> {
        self.write(|p| {
            let parent = parent.unwrap_or_else(|| p.dag.latest_head());
            let author = p.author().to_string();
            let mut next = p.dag.clone();
            let id = next.append_node(parent, op, author, p.clock.now(), note)?;
            p.store.persist_node(&next, id)?;
            p.dag = next;
            Ok(id)
        })
    }

    /// Starts a branch: `op` applied to `from`, which may already have
    /// children.
    pub fn branch(&mut self, from: NodeId, op: EditOp, note: Option<String>) -> Result<NodeId> {
        self.apply(Some(from), op, note)
    }

    pub fn annotate(&mut self, id: NodeId, note: Option<String>) -> Result<()> {
        self.write(|p| {
            let mut next = p.dag.clone();
            next.set_note(id, note)?;
            p.store.rewrite_logs(&next)?;
            p.dag = next;
            Ok(())
        })
    }

    pub fn merge(&mut self, left: NodeId, right: NodeId) -> Result<(MergeResult, NodeId)> {
        self.write(|p| {
            let author = p.author().to_string();
            let mut next = p.dag.clone();
            let (result, id) = merge_revisions(&mut next, left, right, &author, p.clock.now())?;
            p.store.persist_node(&next, id)?;
            p.dag = next;
            Ok((result, id))
        })
    }

    pub fn diff(&self, src: NodeId, dst: NodeId) -> Result<DiffReport<'_>> {
        semantic_diff(&self.dag, src, dst)
    }

    /// Commits a milestone of `head` (the most recent head by default).
    pub fn commit(&mut self, message: &str, head: Option<NodeId>) -> Result<(u32, NodeId)> {
        if message.trim().is_empty() {
            return Err(Error::InvalidArgument("commit message is empty".into()));
        }
        self.write(|p| {
            let head = head.unwrap_or_else(|| p.dag.latest_head());
            let rev = p
                .store
                .commit_milestone(&p.dag, head, message, p.author(), p.backend.as_ref())?;
            Ok((rev, head))
        })
    }

    pub fn push(&mut self) -> Result<()> {
        self.write(|p| p.store.push(p.backend.as_ref()))
    }

    /// Pulls remote history. A fast-forward is loaded immediately; diverged
    /// histories are reported and left alone.
    pub fn pull(&mut self) -> Result<PullReport> {
        self.write(|p| {
            let report = p.store.pull(&p.dag, p.backend.as_ref())?;
            if matches!(report, PullReport::FastForward { .. }) {
                let (store, dag) = store::load_project(p.store.root())?;
                p.store = store;
                p.dag = dag;
            }
            Ok(report)
        })
    }

    pub fn export(&self, id: NodeId, path: &Path, format: Option<ImageFormat>) -> Result<ImageFormat> {
        let format = match format {
            Some(f) => f,
            None => path
                .extension()
                .and_then(|e| e.to_str())
                .map(ImageFormat::from_extension)
                .transpose()?
                .unwrap_or(self.format()),
        };
        self.store.export_image(&self.dag, id, path, format)?;
        Ok(format)
    }
}

fn read_dag_json(store: &ProjectStore) -> Result<Vec<u8>> {
    let path = store.path(DAG_FILE);
    fs::read(&path).map_err(|e| Error::io(&path, e))
}
