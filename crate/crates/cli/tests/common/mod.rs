#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use imgvc_cli::api;
use imgvc_core::store::{self, InitOptions};
use imgvc_core::{Clock, EditOp, ImageFormat, NodeId, Project, RasterImage, Region, Timestamp};
use serde_json::Value;
use tower::ServiceExt;

pub fn clock() -> Clock {
    Clock::Fixed(Timestamp::from_micros(1_700_000_000_000_000))
}

/// 6x6 canvas: 1 = invert(0), 2 = crop(0) to 3x3, 3 = mirror(1).
pub fn fixture(dir: &Path, remote: Option<&str>) -> Project {
    let mut opts = InitOptions::new("fixture", "ada", ImageFormat::Png);
    opts.canvas = (6, 6);
    opts.remote_url = remote.map(str::to_string);
    let mut p = Project::init(dir, opts, clock()).unwrap();
    p.apply(Some(NodeId(0)), EditOp::Invert, None).unwrap();
    let crop = EditOp::Crop {
        region: Region::new(0, 0, 3, 3),
    };
    p.apply(Some(NodeId(0)), crop, Some("corner".into())).unwrap();
    p.apply(Some(NodeId(1)), EditOp::Mirror, None).unwrap();
    p
}

/// Every file below `dir` except the writer lock.
pub fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(dir)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file() && e.file_name() != store::LOCK_FILE)
        .map(|e| (e.path().strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(e.path()).unwrap()))
        .collect()
}

pub struct Api {
    rt: tokio::runtime::Runtime,
    app: Router,
}

impl Api {
    pub fn new(project: Project) -> Api {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        let app = api::router(Arc::new(tokio::sync::RwLock::new(project)));
        Api { rt, app }
    }

    pub fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
            .unwrap();
        self.rt.block_on(async {
            let resp = self.app.clone().oneshot(req).await.unwrap();
            let status = resp.status();
            (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
        })
    }

    pub fn json(&self, method: &str, uri: &str, body: Option<Value>) -> Value {
        let (status, bytes) = self.call(method, uri, body);
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        assert!(status.is_success(), "{method} {uri}: {status} {v}");
        v
    }

    pub fn image(&self, uri: &str) -> RasterImage {
        let (status, bytes) = self.call("GET", uri, None);
        assert!(status.is_success(), "GET {uri}: {status}");
        RasterImage::decode(&bytes, ImageFormat::Png).unwrap()
    }
}
