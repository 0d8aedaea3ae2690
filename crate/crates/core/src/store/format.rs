//! Byte formats of the project logs: `Project.properties`, `nodes.csv`,
//! `dag.json` and `deltas/<id>.csv`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde_json::{json, Map, Value};

use crate::dag::{DagNode, NodeAction, NodeId};
use crate::edit::EditOp;
use crate::error::{Error, Result};
use crate::raster::{ImageFormat, RasterImage};
use crate::timestamp::Timestamp;

pub const DAG_FORMAT_VERSION: u64 = 1;
pub const NODES_HEADER: [&str; 7] = ["id", "kind", "author", "timestamp", "parents", "note", "thumbnail"];
pub const MILESTONES_HEADER: [&str; 3] = ["rev", "node", "message"];

/// Project metadata stored in `Project.properties`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Properties {
    pub name: String,
    pub author: String,
    pub created: Timestamp,
    pub format: ImageFormat,
    pub remote: Option<String>,
}

impl Properties {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let remote = self.remote.as_deref().unwrap_or("");
        for (k, v) in [
            ("name", self.name.as_str()),
            ("author", &self.author),
            ("created", &self.created.to_string()),
            ("format", self.format.name()),
            ("remote", remote),
        ] {
            let _ = writeln!(out, "{k}={}", escape_property(v));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for line in text.lines() {
            let line = line.trim_start();
            if line.is_empty() || line.starts_with('#') || line.starts_with('!') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::CorruptFile(format!("Project.properties line {line:?} has no '='")))?;
            map.insert(k.trim().to_string(), unescape_property(v));
        }
        let mut get = |k: &str| {
            map.remove(k)
                .ok_or_else(|| Error::CorruptFile(format!("Project.properties lacks {k:?}")))
        };
        let remote = get("remote")?;
        Ok(Properties {
            name: get("name")?,
            author: get("author")?,
            created: get("created")?.parse()?,
            format: get("format")?.parse()?,
            remote: (!remote.is_empty()).then_some(remote),
        })
    }
}

fn escape_property(v: &str) -> String {
    v.replace('\\', "\\\\").replace('\n', "\\n").replace('\r', "\\r")
}

fn unescape_property(v: &str) -> String {
    let mut out = String::with_capacity(v.len());
    let mut chars = v.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => {}
        }
    }
    out
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new())
}

fn csv_error(what: &str, e: csv::Error) -> Error {
    Error::CorruptFile(format!("{what}: {e}"))
}

/// Two-column `key,value` rows of a node's payload.
pub fn render_delta(action: &NodeAction) -> Vec<u8> {
    let mut w = csv_writer();
    let rows: Vec<(&str, String)> = match action {
        NodeAction::Edit(op) => op.to_record(),
        NodeAction::Merge(img) => vec![
            ("kind", NodeAction::MERGE_KIND.to_string()),
            ("w", img.width().to_string()),
            ("h", img.height().to_string()),
            ("pixels", BASE64.encode(img.to_rgba_bytes())),
        ],
    };
    for (k, v) in rows {
        w.write_record([k, v.as_str()]).expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

pub fn parse_delta(bytes: &[u8]) -> Result<NodeAction> {
    let mut rows = Vec::new();
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error("delta", e))?;
        if rec.len() != 2 {
            return Err(Error::CorruptFile(format!("delta row has {} columns", rec.len())));
        }
        rows.push((rec[0].to_string(), rec[1].to_string()));
    }
    if rows.first().is_some_and(|(k, v)| k == "kind" && v == NodeAction::MERGE_KIND) {
        let field = |key: &str| {
            rows.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::CorruptFile(format!("merge delta lacks {key}")))
        };
        let num = |key: &str| -> Result<u32> {
            field(key)?
                .parse()
                .map_err(|_| Error::CorruptFile(format!("merge delta {key} is not a number")))
        };
        let bytes = BASE64
            .decode(field("pixels")?)
            .map_err(|e| Error::CorruptFile(format!("merge delta pixels: {e}")))?;
        let img = RasterImage::from_rgba_bytes(num("w")?, num("h")?, &bytes)
            .map_err(|e| Error::CorruptFile(e.to_string()))?;
        return Ok(NodeAction::Merge(Arc::new(img)));
    }
    EditOp::from_record(rows).map(NodeAction::Edit)
}

/// Parameters listed in `dag.json`: the delta record without `kind` and
/// without bulky pixel payloads.
pub fn summary_params(action: &NodeAction) -> BTreeMap<String, String> {
    match action {
        NodeAction::Edit(op) => op
            .to_record()
            .into_iter()
            .filter(|(k, _)| *k != "kind" && *k != "pixels")
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        NodeAction::Merge(img) => BTreeMap::from([
            ("h".to_string(), img.height().to_string()),
            ("w".to_string(), img.width().to_string()),
        ]),
    }
}

/// Node metadata as recorded in `dag.json` and `nodes.csv`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeHeader {
    pub id: NodeId,
    pub kind: String,
    pub author: String,
    pub timestamp: Timestamp,
    pub parents: Vec<NodeId>,
    pub note: Option<String>,
    pub thumbnail: String,
    /// Only known from `dag.json`.
    pub params: Option<BTreeMap<String, String>>,
}

impl NodeHeader {
    pub fn of(node: &DagNode) -> Self {
        NodeHeader {
            id: node.id,
            kind: node.kind().to_string(),
            author: node.author.clone(),
            timestamp: node.timestamp,
            parents: node.parents.clone(),
            note: node.note.clone(),
            thumbnail: node.thumbnail.clone(),
            params: Some(summary_params(&node.action)),
        }
    }

    /// Field-by-field comparison, skipping params when either side lacks
    /// them. Returns the name of the first differing field.
    pub fn first_difference(&self, other: &NodeHeader) -> Option<&'static str> {
        if self.id != other.id {
            Some("id")
        } else if self.kind != other.kind {
            Some("kind")
        } else if self.author != other.author {
            Some("author")
        } else if self.timestamp != other.timestamp {
            Some("timestamp")
        } else if self.parents != other.parents {
            Some("parents")
        } else if self.note != other.note {
            Some("note")
        } else if self.thumbnail != other.thumbnail {
            Some("thumbnail")
        } else if matches!((&self.params, &other.params), (Some(a), Some(b)) if a != b) {
            Some("params")
        } else {
            None
        }
    }
}

fn join_parents(parents: &[NodeId]) -> String {
    parents.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("|")
}

fn node_row(h: &NodeHeader) -> [String; 7] {
    [
        h.id.to_string(),
        h.kind.clone(),
        h.author.clone(),
        h.timestamp.to_string(),
        join_parents(&h.parents),
        h.note.clone().unwrap_or_default(),
        h.thumbnail.clone(),
    ]
}

pub fn render_nodes_header() -> Vec<u8> {
    let mut w = csv_writer();
    w.write_record(NODES_HEADER).expect("writing to memory");
    w.into_inner().expect("writing to memory")
}

pub fn render_nodes_row(h: &NodeHeader) -> Vec<u8> {
    let mut w = csv_writer();
    w.write_record(node_row(h)).expect("writing to memory");
    w.into_inner().expect("writing to memory")
}

pub fn render_nodes_csv<'a>(headers: impl IntoIterator<Item = &'a NodeHeader>) -> Vec<u8> {
    let mut out = render_nodes_header();
    for h in headers {
        out.extend(render_nodes_row(h));
    }
    out
}

fn parse_id(s: &str) -> Result<NodeId> {
    s.parse::<u64>()
        .map(NodeId)
        .map_err(|_| Error::CorruptFile(format!("{s:?} is not a node id")))
}

fn parse_parents(s: &str) -> Result<Vec<NodeId>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split('|').map(parse_id).collect()
}

pub fn parse_nodes_csv(bytes: &[u8]) -> Result<Vec<NodeHeader>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = r.headers().map_err(|e| csv_error("nodes.csv", e))?;
    if header.iter().ne(NODES_HEADER) {
        return Err(Error::CorruptFile(format!("nodes.csv header is {header:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| csv_error("nodes.csv", e))?;
            if rec.len() != NODES_HEADER.len() {
                return Err(Error::CorruptFile(format!("nodes.csv row has {} columns", rec.len())));
            }
            Ok(NodeHeader {
                id: parse_id(&rec[0])?,
                kind: rec[1].to_string(),
                author: rec[2].to_string(),
                timestamp: rec[3].parse()?,
                parents: parse_parents(&rec[4])?,
                note: (!rec[5].is_empty()).then(|| rec[5].to_string()),
                thumbnail: rec[6].to_string(),
                params: None,
            })
        })
        .collect()
}

/// One node's `dag.json` object, keys sorted.
pub fn render_dag_node(n: &DagNode) -> Vec<u8> {
    let h = NodeHeader::of(n);
    let v = json!({
        "id": h.id.0,
        "kind": h.kind,
        "author": h.author,
        "timestamp": h.timestamp.to_string(),
        "parents": h.parents.iter().map(|p| p.0).collect::<Vec<_>>(),
        "note": h.note,
        "thumbnail": h.thumbnail,
        "params": h.params,
    });
    serde_json::to_vec(&v).expect("serializing JSON values cannot fail")
}

/// Assembles `dag.json` from rendered node objects.
pub fn assemble_dag_json<'a>(project: &str, nodes: impl IntoIterator<Item = &'a [u8]>) -> Vec<u8> {
    let mut out = b"{\"nodes\":[".to_vec();
    for (i, node) in nodes.into_iter().enumerate() {
        if i > 0 {
            out.push(b',');
        }
        out.extend_from_slice(node);
    }
    out.extend_from_slice(b"],\"project\":");
    out.extend(serde_json::to_vec(project).expect("serializing a string cannot fail"));
    out.extend_from_slice(format!(",\"version\":{DAG_FORMAT_VERSION}}}").as_bytes());
    out
}

/// Compact JSON with sorted keys, so unchanged content rewrites to
/// identical bytes.
pub fn render_dag_json(project: &str, nodes: &[DagNode]) -> Vec<u8> {
    let rendered: Vec<_> = nodes.iter().map(render_dag_node).collect();
    assemble_dag_json(project, rendered.iter().map(Vec::as_slice))
}

pub struct DagDocument {
    pub project: String,
    pub nodes: Vec<NodeHeader>,
}

pub fn parse_dag_json(bytes: &[u8]) -> Result<DagDocument> {
    let bad = |what: &str| Error::CorruptFile(format!("dag.json: {what}"));
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| bad(&e.to_string()))?;
    let version = doc.get("version").and_then(Value::as_u64).ok_or_else(|| bad("missing version"))?;
    if version != DAG_FORMAT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let project = doc
        .get("project")
        .and_then(Value::as_str)
        .ok_or_else(|| bad("missing project"))?
        .to_string();
    let raw = doc.get("nodes").and_then(Value::as_array).ok_or_else(|| bad("missing nodes"))?;
    let mut nodes = Vec::with_capacity(raw.len());
    for n in raw {
        let n: &Map<String, Value> = n.as_object().ok_or_else(|| bad("node is not an object"))?;
        let str_field = |k: &str| {
            n.get(k)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| bad(&format!("node field {k} missing")))
        };
        let id = n.get("id").and_then(Value::as_u64).ok_or_else(|| bad("node id missing"))?;
        let parents = n
            .get("parents")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("node parents missing"))?
            .iter()
            .map(|p| p.as_u64().map(NodeId).ok_or_else(|| bad("parent is not an id")))
            .collect::<Result<_>>()?;
        let note = match n.get("note") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(bad("note is not a string")),
        };
        let params = n
            .get("params")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("node params missing"))?
            .iter()
            .map(|(k, v)| {
                v.as_str()
                    .map(|s| (k.clone(), s.to_string()))
                    .ok_or_else(|| bad("param is not a string"))
            })
            .collect::<Result<_>>()?;
        nodes.push(NodeHeader {
            id: NodeId(id),
            kind: str_field("kind")?,
            author: str_field("author")?,
            timestamp: str_field("timestamp")?.parse()?,
            parents,
            note,
            thumbnail: str_field("thumbnail")?,
            params: Some(params),
        });
    }
    Ok(DagDocument { project, nodes })
}

/// One row of `milestones/index.csv`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MilestoneEntry {
    pub rev: u32,
    pub node: NodeId,
    pub message: String,
}

pub fn render_milestones(entries: &[MilestoneEntry]) -> Vec<u8> {
    let mut w = csv_writer();
    w.write_record(MILESTONES_HEADER).expect("writing to memory");
    for e in entries {
        w.write_record([e.rev.to_string(), e.node.to_string(), e.message.clone()])
            .expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

pub fn parse_milestones(bytes: &[u8]) -> Result<Vec<MilestoneEntry>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| csv_error("milestones/index.csv", e))?;
            if rec.len() != 3 {
                return Err(Error::CorruptFile("milestones/index.csv row needs 3 columns".into()));
            }
            Ok(MilestoneEntry {
                rev: rec[0]
                    .parse()
                    .map_err(|_| Error::CorruptFile(format!("bad revision number {:?}", &rec[0])))?,
                node: parse_id(&rec[1])?,
                message: rec[2].to_string(),
            })
        })
        .collect()
}
