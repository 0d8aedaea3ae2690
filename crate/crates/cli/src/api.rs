//! Local HTTP service over one project.
//!
//! Mutations run one at a time behind the project's write guard and take the
//! on-disk writer lock, so a concurrently running CLI command yields 409.
//! Reads share the last consistent state.

use std::collections::HashMap;
use std::net::{Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use imgvc_core::{semantic_diff, Error, ImageFormat, NodeId, Project, RasterImage};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use tokio::sync::RwLock;

use crate::payload;

pub type SharedProject = Arc<RwLock<Project>>;

/// HTTP status for an engine error class.
pub fn status_for(err: &Error) -> StatusCode {
    match err.class() {
        "missing-node" => StatusCode::NOT_FOUND,
        "lock-held" | "empty-commit" | "already-initialized" => StatusCode::CONFLICT,
        "not-an-ancestor" | "merge-shape" | "degenerate-merge" | "shape" => StatusCode::UNPROCESSABLE_ENTITY,
        "no-remote" => StatusCode::PRECONDITION_FAILED,
        "backend" | "backend-unavailable" => StatusCode::FAILED_DEPENDENCY,
        "io" | "corrupt-store" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    }
}

pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (status_for(&self.0), Json(payload::error(&self.0))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(project: SharedProject) -> Router {
    Router::new()
        .route("/api/dag", get(get_dag))
        .route("/api/node/{id}", get(get_node))
        .route("/api/node/{id}/image.png", get(get_image))
        .route("/api/node/{id}/thumb.png", get(get_thumb))
        .route("/api/diff", get(get_diff))
        .route("/api/diff/frame", get(get_frame))
        .route("/api/pixeldiff", get(get_pixeldiff))
        .route("/api/apply", post(post_apply))
        .route("/api/annotate", post(post_annotate))
        .route("/api/branch", post(post_branch))
        .route("/api/merge", post(post_merge))
        .route("/api/commit", post(post_commit))
        .route("/api/push", post(post_push))
        .route("/api/pull", post(post_pull))
        .with_state(project)
}

/// Serves `project` on the loopback interface until interrupted. `ready`
/// receives the bound address.
pub fn serve(
    project: Project,
    port: u16,
    ui: Option<PathBuf>,
    ready: impl FnOnce(SocketAddr),
) -> imgvc_core::Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("<runtime>", e))?;
    runtime.block_on(async move {
        let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| Error::io(addr.to_string(), e))?;
        let local = listener.local_addr().map_err(|e| Error::io(addr.to_string(), e))?;
        let mut app = router(Arc::new(RwLock::new(project)));
        if let Some(dir) = ui {
            app = app.fallback_service(tower_http::services::ServeDir::new(dir));
        }
        ready(local);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Error::io(local.to_string(), e))
    })
}

/// Read access to the latest consistent state.
async fn read(project: &SharedProject) -> ApiResult<tokio::sync::RwLockReadGuard<'_, Project>> {
    let stale = project.read().await.is_stale()?;
    if stale {
        project.write().await.sync()?;
    }
    Ok(project.read().await)
}

fn node_id(raw: &str) -> ApiResult<NodeId> {
    Ok(raw.parse()?)
}

fn query_id(q: &HashMap<String, String>, key: &str) -> ApiResult<NodeId> {
    let raw = q
        .get(key)
        .ok_or_else(|| Error::InvalidArgument(format!("query parameter {key} is required")))?;
    node_id(raw)
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    let text: &[u8] = if bytes.is_empty() { b"{}" } else { bytes };
    serde_json::from_slice(text).map_err(|e| ApiError(Error::InvalidArgument(format!("bad request body: {e}"))))
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

fn encode(img: &RasterImage) -> ApiResult<Response> {
    Ok(png(img.encode(ImageFormat::Png)?))
}

async fn get_dag(State(p): State<SharedProject>) -> ApiResult<Json<Value>> {
    let p = read(&p).await?;
    Ok(Json(payload::dag(p.name(), p.dag())?))
}

async fn get_node(State(p): State<SharedProject>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let id = node_id(&id)?;
    let p = read(&p).await?;
    Ok(Json(payload::node_detail(p.dag(), id)?))
}

async fn get_image(State(p): State<SharedProject>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = node_id(&id)?;
    let p = read(&p).await?;
    let img = p.dag().replay_shared(id)?;
    encode(&img)
}

async fn get_thumb(State(p): State<SharedProject>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = node_id(&id)?;
    let p = read(&p).await?;
    let path = p.store().path(&p.dag().node(id)?.thumbnail);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(path, e))?;
    Ok(png(bytes))
}

async fn get_diff(State(p): State<SharedProject>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Json<Value>> {
    let (src, dst) = (query_id(&q, "src")?, query_id(&q, "dst")?);
    let p = read(&p).await?;
    let report = semantic_diff(p.dag(), src, dst)?;
    Ok(Json(payload::diff(&report)?))
}

async fn get_frame(State(p): State<SharedProject>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Response> {
    let (src, dst) = (query_id(&q, "src")?, query_id(&q, "dst")?);
    let k = q
        .get("k")
        .ok_or_else(|| Error::InvalidArgument("query parameter k is required".into()))?
        .parse::<usize>()
        .map_err(|e| Error::InvalidArgument(format!("bad frame index: {e}")))?;
    let p = read(&p).await?;
    let report = semantic_diff(p.dag(), src, dst)?;
    let img = report.frame(k)?;
    encode(&img)
}

async fn get_pixeldiff(State(p): State<SharedProject>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Json<Value>> {
    let (a, b) = (query_id(&q, "a")?, query_id(&q, "b")?);
    let p = read(&p).await?;
    let delta = imgvc_core::pixel_diff(&*p.dag().replay_shared(a)?, &*p.dag().replay_shared(b)?)?;
    Ok(Json(payload::pixel_delta(&delta)))
}

/// Flattens JSON parameter values into the `key=value` form the CLI uses.
/// Point lists may be given as `[[x, y], ...]`.
fn params(map: Option<Map<String, Value>>) -> ApiResult<Vec<(String, String)>> {
    let bad = |k: &str| ApiError(Error::InvalidParameter(format!("unsupported value for parameter {k}")));
    let mut out = Vec::new();
    for (k, v) in map.unwrap_or_default() {
        let text = match &v {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Array(points) => points
                .iter()
                .map(|pt| match pt.as_array().map(|a| a.as_slice()) {
                    Some([x, y]) if x.is_u64() && y.is_u64() => Ok(format!("{x},{y}")),
                    _ => Err(bad(&k)),
                })
                .collect::<ApiResult<Vec<_>>>()?
                .join(";"),
            _ => return Err(bad(&k)),
        };
        out.push((k, text));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct ApplyBody {
    parent: Option<u64>,
    op: String,
    params: Option<Map<String, Value>>,
    note: Option<String>,
}

#[derive(Deserialize)]
struct BranchBody {
    from: u64,
    op: String,
    params: Option<Map<String, Value>>,
    note: Option<String>,
}

#[derive(Deserialize)]
struct AnnotateBody {
    id: u64,
    note: Option<String>,
}

#[derive(Deserialize)]
struct MergeBody {
    left: u64,
    right: u64,
}

#[derive(Deserialize)]
struct CommitBody {
    message: String,
    node: Option<u64>,
}

async fn post_apply(State(p): State<SharedProject>, raw: Bytes) -> ApiResult<Json<Value>> {
    let b: ApplyBody = body(&raw)?;
    let op = crate::parse_op(&b.op, &params(b.params)?)?;
    let mut p = p.write().await;
    let id = p.apply(b.parent.map(NodeId), op, b.note)?;
    Ok(Json(payload::node_detail(p.dag(), id)?))
}

async fn post_branch(State(p): State<SharedProject>, raw: Bytes) -> ApiResult<Json<Value>> {
    let b: BranchBody = body(&raw)?;
    let op = crate::parse_op(&b.op, &params(b.params)?)?;
    let mut p = p.write().await;
    let id = p.branch(NodeId(b.from), op, b.note)?;
    Ok(Json(payload::node_detail(p.dag(), id)?))
}

async fn post_annotate(State(p): State<SharedProject>, raw: Bytes) -> ApiResult<Json<Value>> {
    let b: AnnotateBody = body(&raw)?;
    let mut p = p.write().await;
    p.annotate(NodeId(b.id), b.note)?;
    Ok(Json(payload::node_detail(p.dag(), NodeId(b.id))?))
}

async fn post_merge(State(p): State<SharedProject>, raw: Bytes) -> ApiResult<Json<Value>> {
    let b: MergeBody = body(&raw)?;
    let mut p = p.write().await;
    let (result, id) = p.merge(NodeId(b.left), NodeId(b.right))?;
    Ok(Json(payload::merge(&result, id)))
}

async fn post_commit(State(p): State<SharedProject>, raw: Bytes) -> ApiResult<Json<Value>> {
    let b: CommitBody = body(&raw)?;
    let mut p = p.write().await;
    let (rev, node) = p.commit(&b.message, b.node.map(NodeId))?;
    Ok(Json(payload::commit(rev, node)))
}

async fn post_push(State(p): State<SharedProject>) -> ApiResult<Json<Value>> {
    p.write().await.push()?;
    Ok(Json(json!({"status": "pushed"})))
}

async fn post_pull(State(p): State<SharedProject>) -> ApiResult<Json<Value>> {
    let report = p.write().await.pull()?;
    Ok(Json(payload::pull(&report)))
}
