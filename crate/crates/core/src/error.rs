use std::path::PathBuf;

use thiserror::Error;

use crate::dag::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report. Each variant belongs to exactly one
/// error class (see [`Error::class`]), which is what the CLI and HTTP service
/// surface to callers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid root: {0} cannot initialize a project")]
    InvalidRoot(&'static str),
    #[error("node {0} does not exist")]
    MissingNode(NodeId),
    #[error("node {src} is not an ancestor of node {dst}")]
    NotAnAncestor { src: NodeId, dst: NodeId },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("image shapes differ: {0}x{1} vs {2}x{3}")]
    Shape(u32, u32, u32, u32),
    #[error("cannot merge images of different shapes ({0}x{1} vs {2}x{3}); reconcile geometry first")]
    MergeShape(u32, u32, u32, u32),
    #[error("cannot merge node {0} with itself")]
    DegenerateMerge(NodeId),
    #[error("index {index} out of range (0..={max})")]
    Index { index: usize, max: usize },
    #[error("cannot import image: {0}")]
    Import(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("{0} already contains a project")]
    AlreadyInitialized(PathBuf),
    #[error("corrupt store at node {node}: {reason}")]
    CorruptStore { node: NodeId, reason: String },
    #[error("corrupt store: {0}")]
    CorruptFile(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("version-control backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("nothing to commit")]
    EmptyCommit,
    #[error("no remote configured for this project")]
    NoRemote,
    #[error("backend command `{command}` failed: {output}")]
    Backend { command: String, output: String },
    #[error("project is locked by another writer ({0})")]
    LockHeld(String),
}

impl Error {
    /// Stable, machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::InvalidRoot(_) => "invalid-root",
            Error::MissingNode(_) => "missing-node",
            Error::NotAnAncestor { .. } => "not-an-ancestor",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Shape(..) => "shape",
            Error::MergeShape(..) => "merge-shape",
            Error::DegenerateMerge(_) => "degenerate-merge",
            Error::Index { .. } => "index",
            Error::Import(_) => "import",
            Error::UnsupportedFormat(_) => "unsupported-format",
            Error::AlreadyInitialized(_) => "already-initialized",
            Error::CorruptStore { .. } | Error::CorruptFile(_) => "corrupt-store",
            Error::Io { .. } => "io",
            Error::BackendUnavailable(_) => "backend-unavailable",
            Error::EmptyCommit => "empty-commit",
            Error::NoRemote => "no-remote",
            Error::Backend { .. } => "backend",
            Error::LockHeld(_) => "lock-held",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

/// All error classes, in declaration order.
pub const ERROR_CLASSES: &[&str] = &[
    "invalid-parameter",
    "invalid-root",
    "missing-node",
    "not-an-ancestor",
    "invalid-argument",
    "shape",
    "merge-shape",
    "degenerate-merge",
    "index",
    "import",
    "unsupported-format",
    "already-initialized",
    "corrupt-store",
    "io",
    "backend-unavailable",
    "empty-commit",
    "no-remote",
    "backend",
    "lock-held",
];
