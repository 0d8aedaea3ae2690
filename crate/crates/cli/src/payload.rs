//! JSON shapes shared by `--json` output and the HTTP API. Images are
//! referenced by URL, never inlined.

use imgvc_core::diff::run_lengths;
use imgvc_core::store::format::summary_params;
use imgvc_core::store::PullReport;
use imgvc_core::{DiffReport, Error, MergeResult, NodeId, PixelDelta, Result, RevisionDag};
use serde_json::{json, Value};

pub fn image_url(id: NodeId) -> String {
    format!("/api/node/{id}/image.png")
}

pub fn thumb_url(id: NodeId) -> String {
    format!("/api/node/{id}/thumb.png")
}

pub fn frame_url(src: NodeId, dst: NodeId, k: usize) -> String {
    format!("/api/diff/frame?src={src}&dst={dst}&k={k}")
}

fn ids(ids: impl IntoIterator<Item = NodeId>) -> Value {
    ids.into_iter().map(|i| i.0).collect()
}

/// Summary row used in the graph listing.
pub fn node_brief(dag: &RevisionDag, id: NodeId) -> Result<Value> {
    let node = dag.node(id)?;
    Ok(json!({
        "id": id.0,
        "kind": node.kind(),
        "author": node.author,
        "timestamp": node.timestamp.to_string(),
        "note": node.note,
        "parents": ids(node.parents.iter().copied()),
        "thumbnail": thumb_url(id),
    }))
}

/// Everything the node-details view shows.
pub fn node_detail(dag: &RevisionDag, id: NodeId) -> Result<Value> {
    let node = dag.node(id)?;
    let (w, h) = dag.dimensions(id)?;
    let mut v = node_brief(dag, id)?;
    let obj = v.as_object_mut().expect("object");
    obj.insert("summary".into(), node.action.summary().into());
    obj.insert("params".into(), json!(summary_params(&node.action)));
    obj.insert("children".into(), ids(dag.children(id)));
    obj.insert("width".into(), w.into());
    obj.insert("height".into(), h.into());
    obj.insert("image".into(), image_url(id).into());
    Ok(v)
}

pub fn dag(name: &str, dag: &RevisionDag) -> Result<Value> {
    let nodes = dag
        .nodes()
        .iter()
        .map(|n| node_brief(dag, n.id))
        .collect::<Result<Vec<_>>>()?;
    let edges: Vec<_> = dag.edges().into_iter().map(|(p, c)| json!([p.0, c.0])).collect();
    Ok(json!({
        "project": name,
        "nodes": nodes,
        "edges": edges,
        "heads": ids(dag.heads()),
    }))
}

pub fn pixel_delta(delta: &PixelDelta) -> Value {
    json!({
        "width": delta.width,
        "height": delta.height,
        "changed": delta.count,
        "runs": delta.mask_runs(),
    })
}

pub fn diff(report: &DiffReport<'_>) -> Result<Value> {
    let steps: Vec<_> = report
        .steps
        .iter()
        .map(|s| json!({"node": s.node.0, "kind": s.kind, "summary": s.summary}))
        .collect();
    let frames: Vec<_> = (0..report.frame_count())
        .map(|k| frame_url(report.src, report.dst, k))
        .collect();
    Ok(json!({
        "src": report.src.0,
        "dst": report.dst.0,
        "step_count": report.steps.len(),
        "frame_count": report.frame_count(),
        "steps": steps,
        "frames": frames,
        "pixel_delta": report.pixel_delta()?.as_ref().map(pixel_delta),
    }))
}

pub fn merge(result: &MergeResult, node: NodeId) -> Value {
    let conflicts: Vec<bool> = result.provenance.iter().map(|p| p.is_conflict()).collect();
    let count = |name: &str| result.provenance.iter().filter(|p| p.name() == name).count();
    json!({
        "node": node.0,
        "base": result.base.0,
        "left": result.left.0,
        "right": result.right.0,
        "conflict_count": result.conflict_count,
        "conflict_runs": run_lengths(&conflicts),
        "provenance": {
            "base": count("base"),
            "left": count("left"),
            "right": count("right"),
            "conflict-left": count("conflict-left"),
            "conflict-right": count("conflict-right"),
        },
        "image": image_url(node),
    })
}

pub fn commit(revision: u32, node: NodeId) -> Value {
    json!({"revision": revision, "node": node.0})
}

pub fn pull(report: &PullReport) -> Value {
    match report {
        PullReport::UpToDate => json!({"status": "up-to-date"}),
        PullReport::LocalAhead => json!({"status": "local-ahead"}),
        PullReport::FastForward { new_nodes } => {
            json!({"status": "fast-forward", "new_nodes": ids(new_nodes.iter().copied())})
        }
        PullReport::MergeNeeded {
            common,
            local_heads,
            remote_heads,
        } => json!({
            "status": "merge-needed",
            "common": common,
            "local_heads": ids(local_heads.iter().copied()),
            "remote_heads": ids(remote_heads.iter().copied()),
        }),
    }
}

pub fn error(e: &Error) -> Value {
    json!({"error": e.class(), "message": e.to_string()})
}
