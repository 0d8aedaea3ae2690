//! Seam to the external version-control tool.
//!
//! [`GitCli`] shells out to `git`; [`FakeBackend`] keeps repositories and a
//! shared remote in memory so collaboration flows can be tested without a
//! network or a Git installation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};

pub trait VcsBackend: Send + Sync {
    fn is_repo(&self, dir: &Path) -> Result<bool>;
    fn init(&self, dir: &Path) -> Result<()>;
    fn add_remote(&self, dir: &Path, url: &str) -> Result<()>;
    fn add(&self, dir: &Path, paths: &[&str]) -> Result<()>;
    /// Whether the index differs from the last commit.
    fn has_staged_changes(&self, dir: &Path) -> Result<bool>;
    fn commit(&self, dir: &Path, message: &str, author: &str) -> Result<()>;
    fn push(&self, dir: &Path) -> Result<()>;
    /// Downloads the remote state without touching the work tree. Returns
    /// `false` when the remote has nothing yet.
    fn fetch(&self, dir: &Path) -> Result<bool>;
    /// Contents of `path` in the last fetched remote state.
    fn remote_file(&self, dir: &Path, path: &str) -> Result<Option<Vec<u8>>>;
    /// Brings the fetched remote state into the work tree.
    fn pull(&self, dir: &Path) -> Result<()>;
}

/// Drives the `git` command-line tool.
#[derive(Clone, Debug)]
pub struct GitCli {
    program: OsString,
}

impl Default for GitCli {
    fn default() -> Self {
        GitCli {
            program: std::env::var_os("IMGVC_GIT").unwrap_or_else(|| "git".into()),
        }
    }
}

const REMOTE: &str = "origin";
const BRANCH: &str = "main";

impl GitCli {
    pub fn with_program(program: impl Into<OsString>) -> Self {
        GitCli {
            program: program.into(),
        }
    }

    fn output(&self, dir: &Path, args: &[&str]) -> Result<Output> {
        Command::new(&self.program)
            .arg("-C")
            .arg(dir)
            .args(args)
            .env("GIT_TERMINAL_PROMPT", "0")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .output()
            .map_err(|e| {
                Error::BackendUnavailable(format!("{}: {e}", self.program.to_string_lossy()))
            })
    }

    fn run(&self, dir: &Path, args: &[&str]) -> Result<Vec<u8>> {
        let out = self.output(dir, args)?;
        if out.status.success() {
            Ok(out.stdout)
        } else {
            Err(Error::Backend {
                command: format!("git {}", args.join(" ")),
                output: String::from_utf8_lossy(&[out.stdout, out.stderr].concat()).trim().to_string(),
            })
        }
    }
}

impl VcsBackend for GitCli {
    fn is_repo(&self, dir: &Path) -> Result<bool> {
        // Only a repository rooted exactly at `dir` counts.
        let out = self.output(dir, &["rev-parse", "--show-prefix"])?;
        Ok(out.status.success() && String::from_utf8_lossy(&out.stdout).trim().is_empty())
    }

    fn init(&self, dir: &Path) -> Result<()> {
        self.run(dir, &["init", "-q", "-b", BRANCH]).map(drop)
    }

    fn add_remote(&self, dir: &Path, url: &str) -> Result<()> {
        self.run(dir, &["remote", "add", REMOTE, url]).map(drop)
    }

    fn add(&self, dir: &Path, paths: &[&str]) -> Result<()> {
        let mut args = vec!["add", "-A", "--"];
        args.extend_from_slice(paths);
        self.run(dir, &args).map(drop)
    }

    fn has_staged_changes(&self, dir: &Path) -> Result<bool> {
        let out = self.run(dir, &["status", "--porcelain", "--untracked-files=no"])?;
        Ok(out
            .split(|&b| b == b'\n')
            .any(|line| line.first().is_some_and(|&c| c != b' ' && c != b'?')))
    }

    fn commit(&self, dir: &Path, message: &str, author: &str) -> Result<()> {
        let name = format!("user.name={author}");
        let email = format!("user.email={}@imgvc.local", author.replace(char::is_whitespace, "."));
        self.run(dir, &["-c", &name, "-c", &email, "commit", "-q", "-m", message])
            .map(drop)
    }

    fn push(&self, dir: &Path) -> Result<()> {
        self.run(dir, &["push", "-q", "-u", REMOTE, BRANCH]).map(drop)
    }

    fn fetch(&self, dir: &Path) -> Result<bool> {
        self.run(dir, &["fetch", "-q", REMOTE])?;
        let remote_ref = format!("refs/remotes/{REMOTE}/{BRANCH}");
        Ok(self
            .output(dir, &["rev-parse", "--verify", "-q", &remote_ref])?
            .status
            .success())
    }

    fn remote_file(&self, dir: &Path, path: &str) -> Result<Option<Vec<u8>>> {
        let spec = format!("{REMOTE}/{BRANCH}:{path}");
        let out = self.output(dir, &["show", &spec])?;
        Ok(out.status.success().then_some(out.stdout))
    }

    fn pull(&self, dir: &Path) -> Result<()> {
        self.run(dir, &["pull", "-q", "--ff-only", REMOTE, BRANCH]).map(drop)
    }
}

type Snapshot = BTreeMap<String, Vec<u8>>;

#[derive(Default)]
struct FakeRemote {
    /// Every pushed snapshot, oldest first.
    history: Vec<Snapshot>,
}

#[derive(Default)]
struct FakeRepo {
    remote_url: Option<String>,
    index: Option<Snapshot>,
    head: Option<Snapshot>,
    commits: usize,
    /// Remote history length this repository last synchronized with.
    synced: usize,
    fetched: Option<Snapshot>,
}

/// Scripted in-memory stand-in for Git. Clones of one `FakeBackend` share a
/// single remote, so two project directories driven by clones of the same
/// backend behave like two collaborators.
#[derive(Clone, Default)]
pub struct FakeBackend {
    remote: Arc<Mutex<FakeRemote>>,
    repos: Arc<Mutex<HashMap<PathBuf, FakeRepo>>>,
    log: Arc<Mutex<Vec<String>>>,
    unavailable: Arc<Mutex<HashSet<&'static str>>>,
}

impl FakeBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Commands invoked so far, e.g. `"commit -m first"`.
    pub fn commands(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }

    pub fn commit_count(&self, dir: &Path) -> usize {
        self.repos.lock().unwrap().get(&key(dir)).map_or(0, |r| r.commits)
    }

    /// Makes the named command fail as if the tool were missing.
    pub fn make_unavailable(&self, command: &'static str) {
        self.unavailable.lock().unwrap().insert(command);
    }

    fn record(&self, command: &'static str, detail: &str) -> Result<()> {
        if self.unavailable.lock().unwrap().contains(command) {
            return Err(Error::BackendUnavailable(format!("fake backend: {command} disabled")));
        }
        let entry = if detail.is_empty() {
            command.to_string()
        } else {
            format!("{command} {detail}")
        };
        self.log.lock().unwrap().push(entry);
        Ok(())
    }

    /// Creates a new work tree at `dest` holding the remote's latest state,
    /// like `git clone`.
    pub fn clone_repo(&self, dest: &Path, url: &str) -> Result<()> {
        fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;
        self.init(dest)?;
        self.add_remote(dest, url)?;
        self.pull(dest)
    }

    fn with_repo<T>(&self, dir: &Path, f: impl FnOnce(&mut FakeRepo) -> Result<T>) -> Result<T> {
        let mut repos = self.repos.lock().unwrap();
        let repo = repos.get_mut(&key(dir)).ok_or_else(|| Error::Backend {
            command: "fake".into(),
            output: format!("{} is not a repository", dir.display()),
        })?;
        f(repo)
    }
}

fn key(dir: &Path) -> PathBuf {
    dir.canonicalize().unwrap_or_else(|_| dir.to_path_buf())
}

fn snapshot(dir: &Path) -> Result<Snapshot> {
    fn walk(root: &Path, dir: &Path, out: &mut Snapshot) -> Result<()> {
        let mut entries: Vec<_> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io(dir, e))?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            let rel = path.strip_prefix(root).expect("walk stays below root");
            let rel = rel.to_string_lossy().replace('\\', "/");
            if rel == super::LOCK_FILE || rel.ends_with(".tmp") {
                continue;
            }
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                out.insert(rel, fs::read(&path).map_err(|e| Error::io(&path, e))?);
            }
        }
        Ok(())
    }
    let mut out = Snapshot::new();
    walk(dir, dir, &mut out)?;
    Ok(out)
}

impl VcsBackend for FakeBackend {
    fn is_repo(&self, dir: &Path) -> Result<bool> {
        Ok(self.repos.lock().unwrap().contains_key(&key(dir)))
    }

    fn init(&self, dir: &Path) -> Result<()> {
        self.record("init", "")?;
        self.repos.lock().unwrap().entry(key(dir)).or_default();
        Ok(())
    }

    fn add_remote(&self, dir: &Path, url: &str) -> Result<()> {
        self.record("remote add", url)?;
        self.with_repo(dir, |r| {
            r.remote_url = Some(url.to_string());
            Ok(())
        })
    }

    fn add(&self, dir: &Path, paths: &[&str]) -> Result<()> {
        self.record("add", &paths.join(" "))?;
        let snap = snapshot(dir)?;
        self.with_repo(dir, |r| {
            r.index = Some(snap);
            Ok(())
        })
    }

    fn has_staged_changes(&self, dir: &Path) -> Result<bool> {
        self.with_repo(dir, |r| Ok(r.index.is_some() && r.index != r.head))
    }

    fn commit(&self, dir: &Path, message: &str, _author: &str) -> Result<()> {
        self.record("commit", &format!("-m {message}"))?;
        self.with_repo(dir, |r| {
            if r.index.is_none() || r.index == r.head {
                return Err(Error::Backend {
                    command: "commit".into(),
                    output: "nothing to commit".into(),
                });
            }
            r.head = r.index.clone();
            r.commits += 1;
            Ok(())
        })
    }

    fn push(&self, dir: &Path) -> Result<()> {
        self.record("push", "")?;
        let mut remote = self.remote.lock().unwrap();
        self.with_repo(dir, |r| {
            if r.remote_url.is_none() {
                return Err(Error::Backend {
                    command: "push".into(),
                    output: "no remote".into(),
                });
            }
            if r.synced != remote.history.len() {
                return Err(Error::Backend {
                    command: "push".into(),
                    output: "rejected: non-fast-forward (pull first)".into(),
                });
            }
            if let Some(head) = &r.head {
                if remote.history.last() != Some(head) {
                    remote.history.push(head.clone());
                }
            }
            r.synced = remote.history.len();
            Ok(())
        })
    }

    fn fetch(&self, dir: &Path) -> Result<bool> {
        self.record("fetch", "")?;
        let remote = self.remote.lock().unwrap();
        self.with_repo(dir, |r| {
            r.fetched = remote.history.last().cloned();
            Ok(r.fetched.is_some())
        })
    }

    fn remote_file(&self, dir: &Path, path: &str) -> Result<Option<Vec<u8>>> {
        self.with_repo(dir, |r| Ok(r.fetched.as_ref().and_then(|s| s.get(path).cloned())))
    }

    fn pull(&self, dir: &Path) -> Result<()> {
        self.record("pull", "")?;
        let remote = self.remote.lock().unwrap();
        let Some(latest) = remote.history.last().cloned() else {
            return Ok(());
        };
        for (rel, bytes) in &latest {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        let len = remote.history.len();
        self.with_repo(dir, |r| {
            r.head = Some(latest.clone());
            r.index = Some(latest);
            r.synced = len;
            Ok(())
        })
    }
}
