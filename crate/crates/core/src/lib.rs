//! Revision control for raster images.
//!
//! A project's history is a DAG whose nodes are editing operations
//! ([`EditOp`]). Any revision is rebuilt by replaying its lineage from the
//! root ([`RevisionDag::replay`]); revisions can be compared step by step
//! ([`diff::semantic_diff`]) and merged pixel by pixel
//! ([`merge::merge_revisions`]). [`store`] persists the history as plain
//! CSV/JSON logs and commits milestones through an external Git tool.

pub mod dag;
pub mod diff;
pub mod edit;
pub mod error;
pub mod merge;
pub mod project;
pub mod raster;
pub mod store;
pub mod timestamp;

pub use dag::{DagNode, NodeAction, NodeId, RevisionDag};
pub use diff::{pixel_diff, semantic_diff, DiffReport, PixelDelta};
pub use edit::{apply_edit, Applied, EditOp};
pub use error::{Error, Result};
pub use merge::{merge_revisions, MergeResult, Provenance};
pub use project::{Clock, Project};
pub use raster::ops::{Factor, Orientation, Point};
pub use raster::{ImageFormat, Pixel, RasterImage, Region};
pub use timestamp::Timestamp;
