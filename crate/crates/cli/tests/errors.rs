//! Every error class, through the CLI and the HTTP service.

mod common;

use std::path::Path;
use std::sync::Arc;

use common::{fixture, tree, Api};
use imgvc_cli::Env;
use imgvc_core::store::{self, FakeBackend, GitCli, VcsBackend};
use imgvc_core::error::ERROR_CLASSES;
use imgvc_core::Project;
use serde_json::{json, Value};

#[derive(Clone, Copy)]
enum Backend {
    Fake,
    Unavailable,
    Git,
}

struct Case {
    class: &'static str,
    status: u16,
    remote: Option<&'static str>,
    backend: Backend,
    setup: fn(&Path, &Arc<dyn VcsBackend>),
    /// Runs after the server has loaded the project.
    late: fn(&Path, &Arc<dyn VcsBackend>),
    cli: Option<&'static [&'static str]>,
    http: Option<(&'static str, &'static str, Option<&'static str>)>,
}

fn none(_: &Path, _: &Arc<dyn VcsBackend>) {}

fn commit_once(dir: &Path, backend: &Arc<dyn VcsBackend>) {
    let mut p = Project::open(dir, common::clock()).unwrap().with_backend(backend.clone());
    p.commit("once", None).unwrap();
}

fn hold_lock(dir: &Path, _: &Arc<dyn VcsBackend>) {
    std::fs::write(dir.join(store::LOCK_FILE), format!("{}\n", std::process::id())).unwrap();
}

fn garbage_file(dir: &Path, _: &Arc<dyn VcsBackend>) {
    std::fs::write(dir.join("garbage.png"), b"definitely not an image").unwrap();
}

fn truncate_dag(dir: &Path, _: &Arc<dyn VcsBackend>) {
    let json = std::fs::read(dir.join(store::DAG_FILE)).unwrap();
    std::fs::write(dir.join(store::DAG_FILE), &json[..json.len() / 2]).unwrap();
}

fn remove_thumb(dir: &Path, _: &Arc<dyn VcsBackend>) {
    std::fs::remove_file(dir.join("thumbs/0.png")).unwrap();
}

fn base(class: &'static str, status: u16) -> Case {
    Case {
        class,
        status,
        remote: None,
        backend: Backend::Fake,
        setup: none,
        late: none,
        cli: None,
        http: None,
    }
}

fn cases() -> Vec<Case> {
    vec![
        Case {
            cli: Some(&["apply", "crop", "x0=0", "y0=0", "w=9", "h=1"]),
            http: Some(("POST", "/api/apply", Some(r#"{"op":"crop","params":{"x0":0,"y0":0,"w":9,"h":1}}"#))),
            ..base("invalid-parameter", 400)
        },
        Case {
            cli: Some(&["--dir", "$DIR/fresh", "init", "--name", "x", "--author", "a", "--root", "invert"]),
            ..base("invalid-root", 400)
        },
        Case {
            cli: Some(&["info", "99"]),
            http: Some(("GET", "/api/node/99", None)),
            ..base("missing-node", 404)
        },
        Case {
            cli: Some(&["diff", "3", "1"]),
            http: Some(("GET", "/api/diff?src=3&dst=1", None)),
            ..base("not-an-ancestor", 422)
        },
        Case {
            cli: Some(&["commit", "-m", " "]),
            http: Some(("POST", "/api/commit", Some(r#"{"message":" "}"#))),
            ..base("invalid-argument", 400)
        },
        Case {
            cli: Some(&["diff", "--pixels", "1", "2"]),
            http: Some(("GET", "/api/pixeldiff?a=1&b=2", None)),
            ..base("shape", 422)
        },
        Case {
            cli: Some(&["merge", "1", "2"]),
            http: Some(("POST", "/api/merge", Some(r#"{"left":1,"right":2}"#))),
            ..base("merge-shape", 422)
        },
        Case {
            cli: Some(&["merge", "3", "3"]),
            http: Some(("POST", "/api/merge", Some(r#"{"left":3,"right":3}"#))),
            ..base("degenerate-merge", 422)
        },
        Case {
            cli: Some(&["diff", "0", "3", "--frame", "7", "-o", "$DIR/frame.png"]),
            http: Some(("GET", "/api/diff/frame?src=0&dst=3&k=7", None)),
            ..base("index", 400)
        },
        Case {
            setup: garbage_file,
            cli: Some(&["apply", "import", "file=$DIR/garbage.png"]),
            http: Some(("POST", "/api/apply", Some(r#"{"op":"import","params":{"file":"$DIR/garbage.png"}}"#))),
            ..base("import", 400)
        },
        Case {
            cli: Some(&["export", "0", "-o", "$DIR/out.gif"]),
            http: Some(("POST", "/api/apply", Some(r#"{"op":"import","params":{"format":"gif","w":1,"h":1,"pixels":"AAAAAA=="}}"#))),
            ..base("unsupported-format", 400)
        },
        Case {
            cli: Some(&["init", "--name", "x", "--author", "a"]),
            ..base("already-initialized", 409)
        },
        Case {
            late: truncate_dag,
            cli: Some(&["history"]),
            http: Some(("GET", "/api/dag", None)),
            ..base("corrupt-store", 500)
        },
        Case {
            cli: Some(&["export", "0", "-o", "$DIR/no/such/dir/out.png"]),
            http: Some(("GET", "/api/node/0/thumb.png", None)),
            late: remove_thumb,
            ..base("io", 500)
        },
        Case {
            backend: Backend::Unavailable,
            cli: Some(&["commit", "-m", "m"]),
            http: Some(("POST", "/api/commit", Some(r#"{"message":"m"}"#))),
            ..base("backend-unavailable", 424)
        },
        Case {
            setup: commit_once,
            cli: Some(&["commit", "-m", "again"]),
            http: Some(("POST", "/api/commit", Some(r#"{"message":"again"}"#))),
            ..base("empty-commit", 409)
        },
        Case {
            cli: Some(&["push"]),
            http: Some(("POST", "/api/push", None)),
            ..base("no-remote", 412)
        },
        Case {
            remote: Some("../no-such-remote.git"),
            backend: Backend::Git,
            setup: commit_once,
            cli: Some(&["push"]),
            http: Some(("POST", "/api/push", None)),
            ..base("backend", 424)
        },
        Case {
            setup: hold_lock,
            cli: Some(&["apply", "invert"]),
            http: Some(("POST", "/api/apply", Some(r#"{"op":"invert"}"#))),
            ..base("lock-held", 409)
        },
    ]
}

fn backend_for(kind: Backend) -> Arc<dyn VcsBackend> {
    match kind {
        Backend::Fake => Arc::new(FakeBackend::new()),
        Backend::Unavailable => {
            let fake = FakeBackend::new();
            fake.make_unavailable("init");
            Arc::new(fake)
        }
        Backend::Git => Arc::new(GitCli::default()),
    }
}

#[test]
fn every_class_is_covered() {
    let mut classes: Vec<_> = cases().iter().map(|c| c.class).collect();
    classes.sort();
    let mut all = ERROR_CLASSES.to_vec();
    all.sort();
    assert_eq!(classes, all);
}

#[test]
fn cli_reports_each_class() {
    for case in cases() {
        let Some(args) = case.cli else { continue };
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("p");
        let backend = backend_for(case.backend);
        fixture(&dir, case.remote);
        (case.setup)(&dir, &backend);
        if case.class != "io" {
            (case.late)(&dir, &backend);
        }
        let before = tree(&dir);
        let env = Env {
            clock: common::clock(),
            backend,
        };
        let root = dir.to_str().unwrap();
        let mut argv = vec!["imgvc".to_string(), "--json".into()];
        if !args.contains(&"--dir") {
            argv.extend(["--dir".into(), root.into()]);
        }
        argv.extend(args.iter().map(|a| a.replace("$DIR", root)));
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = imgvc_cli::run(argv, &env, &mut out, &mut err);
        assert_eq!(code, 1, "{}: {}", case.class, String::from_utf8_lossy(&err));
        let v: Value = serde_json::from_slice(&out).unwrap();
        assert_eq!(v["error"], case.class, "{args:?}: {v}");
        assert!(v["message"].as_str().is_some_and(|m| !m.is_empty()));
        let stderr = String::from_utf8(err).unwrap();
        assert!(stderr.starts_with(&format!("error[{}]: ", case.class)), "{stderr}");
        if case.class != "lock-held" {
            assert_eq!(tree(&dir), before, "{} changed the project", case.class);
        }
        assert!(!dir.join("fresh").exists(), "failed init left a directory behind");
    }
}

#[test]
fn http_reports_each_class() {
    for case in cases() {
        let Some((method, uri, body)) = case.http else { continue };
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("p");
        let backend = backend_for(case.backend);
        fixture(&dir, case.remote);
        (case.setup)(&dir, &backend);
        let project = Project::open(&dir, common::clock()).unwrap().with_backend(backend.clone());
        (case.late)(&dir, &backend);
        let before = tree(&dir);
        let api = Api::new(project);
        let (status, bytes) = api.call(method, uri, body.map(|b| serde_json::from_str(&b.replace("$DIR", dir.to_str().unwrap())).unwrap()));
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(status.as_u16(), case.status, "{}: {v}", case.class);
        assert_eq!(v["error"], case.class, "{method} {uri}: {v}");
        assert_eq!(tree(&dir), before, "{} changed the project", case.class);
    }
}

#[test]
fn malformed_requests_are_bad_requests() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("p");
    fixture(&dir, None);
    let api = Api::new(Project::open(&dir, common::clock()).unwrap());
    for (method, uri, body) in [
        ("POST", "/api/apply", Some(json!("not an object"))),
        ("POST", "/api/apply", Some(json!({"parent": 0}))),
        ("POST", "/api/merge", Some(json!({"left": -1, "right": 2}))),
        ("POST", "/api/apply", Some(json!({"op": "brush", "params": {"points": [[1]], "radius": 1, "color": "#000000FF"}}))),
        ("POST", "/api/apply", Some(json!({"op": "nonsense"}))),
        ("GET", "/api/node/abc", None),
        ("GET", "/api/diff?src=0", None),
        ("GET", "/api/diff/frame?src=0&dst=1&k=x", None),
    ] {
        let (status, bytes) = api.call(method, uri, body);
        assert_eq!(status.as_u16(), 400, "{method} {uri}: {}", String::from_utf8_lossy(&bytes));
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        assert!(["invalid-argument", "invalid-parameter"].contains(&v["error"].as_str().unwrap()), "{v}");
    }
}

#[test]
fn usage_errors_exit_with_code_two() {
    let env = Env {
        clock: common::clock(),
        backend: Arc::new(FakeBackend::new()),
    };
    for args in [&["imgvc"][..], &["imgvc", "frobnicate"], &["imgvc", "apply"], &["imgvc", "diff", "0", "1", "--frame", "2"]] {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(imgvc_cli::run(args.to_vec(), &env, &mut out, &mut err), 2, "{args:?}");
        assert!(!err.is_empty());
    }
    let (mut out, mut err) = (Vec::new(), Vec::new());
    assert_eq!(imgvc_cli::run(["imgvc", "--help"], &env, &mut out, &mut err), 0);
    assert!(String::from_utf8(out).unwrap().contains("Usage"));
}
