use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use imgvc_core::store::{GitCli, InitOptions, VcsBackend};
use imgvc_core::{
    semantic_diff, Clock, EditOp, Error, ImageFormat, NodeId, Pixel, Project, Result,
};
use serde_json::{json, Value};

use crate::{payload, DEFAULT_PORT};

#[derive(Parser, Debug)]
#[command(name = "imgvc", version, about = "Revision control for raster images")]
pub struct Cli {
    /// Project directory.
    #[arg(long, global = true, env = "IMGVC_DIR", default_value = ".")]
    pub dir: PathBuf,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Create a project.
    Init(InitArgs),
    /// Apply an operation on top of a node (the latest head by default).
    Apply {
        #[command(flatten)]
        op: OpArgs,
        #[arg(long)]
        parent: Option<u64>,
    },
    /// List every node.
    History,
    /// Show one node.
    Info { id: u64 },
    /// Set or clear a node's note.
    Annotate { id: u64, note: Option<String> },
    /// Start a branch from an existing node.
    Branch {
        #[arg(long)]
        from: u64,
        #[command(flatten)]
        op: OpArgs,
    },
    /// Step-by-step difference from an ancestor to a descendant.
    Diff {
        src: u64,
        dst: u64,
        /// Write frame K of the diff to --output.
        #[arg(long, requires = "output")]
        frame: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Compare the two states pixel by pixel instead; any two nodes.
        #[arg(long, conflicts_with = "frame")]
        pixels: bool,
    },
    /// Merge two revisions into a new node.
    Merge { left: u64, right: u64 },
    /// Commit a milestone of a node (the latest head by default).
    Commit {
        #[arg(short, long)]
        message: String,
        #[arg(long)]
        node: Option<u64>,
    },
    /// Push committed milestones to the remote.
    Push,
    /// Pull history from the remote.
    Pull,
    /// Write a node's image to a file.
    Export {
        id: u64,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        format: Option<String>,
    },
    /// Run the local HTTP service.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Directory of static UI assets to serve at `/`.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct InitArgs {
    #[arg(long)]
    pub name: String,
    #[arg(long)]
    pub author: String,
    /// Milestone image format.
    #[arg(long, default_value = "png")]
    pub format: String,
    /// Image file to start from.
    #[arg(long, conflicts_with_all = ["width", "height", "fill"])]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub remote: Option<String>,
    #[arg(long, default_value_t = 256)]
    pub width: u32,
    #[arg(long, default_value_t = 256)]
    pub height: u32,
    #[arg(long)]
    pub fill: Option<String>,
    /// Explicit root operation, e.g. `--root new w=4 h=4`.
    #[arg(long, num_args = 1.., value_name = "KIND [KEY=VALUE]...", conflicts_with = "source")]
    pub root: Option<Vec<String>>,
}

#[derive(Args, Debug)]
pub struct OpArgs {
    /// Operation kind, e.g. invert, brightness, crop.
    pub kind: String,
    /// Operation parameters as KEY=VALUE. `import` also takes file=PATH.
    #[arg(value_parser = parse_param)]
    pub params: Vec<(String, String)>,
    #[arg(long)]
    pub note: Option<String>,
}

fn parse_param(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))
}

/// Process-wide settings that tests replace.
#[derive(Clone)]
pub struct Env {
    pub clock: Clock,
    pub backend: Arc<dyn VcsBackend>,
}

impl Env {
    pub fn from_process() -> Result<Self> {
        Ok(Env {
            clock: Clock::from_env()?,
            backend: Arc::new(GitCli::default()),
        })
    }
}

/// Builds an operation from its kind and `key=value` parameters.
pub fn parse_op(kind: &str, params: &[(String, String)]) -> Result<EditOp> {
    if kind.eq_ignore_ascii_case("import") {
        if let Some((_, path)) = params.iter().find(|(k, _)| k == "file") {
            if params.len() != 1 {
                return Err(Error::InvalidParameter("import takes either file= or format/w/h/pixels".into()));
            }
            let bytes = std::fs::read(path).map_err(|e| Error::io(Path::new(path), e))?;
            return EditOp::import(&bytes, ImageFormat::detect(&bytes)?);
        }
    }
    let record = std::iter::once(("kind", kind)).chain(params.iter().map(|(k, v)| (k.as_str(), v.as_str())));
    EditOp::from_record(record)
}

fn node(id: u64) -> NodeId {
    NodeId(id)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, env: &Env, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, env, out) {
        Ok(()) => 0,
        Err(e) => {
            if cli.json {
                let _ = writeln!(out, "{}", payload::error(&e));
            }
            let _ = writeln!(err, "error[{}]: {e}", e.class());
            1
        }
    }
}

fn emit(out: &mut dyn Write, json: bool, value: &Value, text: impl FnOnce() -> String) -> Result<()> {
    let rendered = if json { value.to_string() } else { text() };
    writeln!(out, "{rendered}").map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn describe_node(v: &Value) -> String {
    let parents: Vec<String> = v["parents"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|p| p.to_string())
        .collect();
    let mut line = format!(
        "{:>4}  {:<10} {:<12} {}  parents=[{}]",
        v["id"],
        v["kind"].as_str().unwrap_or(""),
        v["author"].as_str().unwrap_or(""),
        v["timestamp"].as_str().unwrap_or(""),
        parents.join(",")
    );
    if let Some(note) = v["note"].as_str() {
        line.push_str(&format!("  \"{note}\""));
    }
    line
}

fn execute(cli: &Cli, env: &Env, out: &mut dyn Write) -> Result<()> {
    let dir = cli.dir.as_path();
    let json = cli.json;
    let open = || -> Result<Project> { Ok(Project::open(dir, env.clock)?.with_backend(env.backend.clone())) };
    match &cli.command {
        Command::Init(a) => {
            let format: ImageFormat = a.format.parse()?;
            let mut opts = InitOptions::new(&a.name, &a.author, format);
            opts.remote_url = a.remote.clone();
            opts.canvas = (a.width, a.height);
            if let Some(fill) = &a.fill {
                opts.fill = fill.parse::<Pixel>()?;
            }
            if let Some(path) = &a.source {
                opts.source_image = Some(std::fs::read(path).map_err(|e| Error::io(path, e))?);
            }
            if let Some(root) = &a.root {
                let params = root[1..]
                    .iter()
                    .map(|p| parse_param(p).map_err(Error::InvalidArgument))
                    .collect::<Result<Vec<_>>>()?;
                opts.root_op = Some(parse_op(&root[0], &params)?);
            }
            let p = Project::init(dir, opts, env.clock)?;
            let v = payload::node_detail(p.dag(), NodeId::ROOT)?;
            emit(out, json, &json!({"project": p.name(), "root": v}), || {
                format!("initialized {} in {}", p.name(), dir.display())
            })
        }
        Command::Apply { op, parent } => {
            let mut p = open()?;
            let edit = parse_op(&op.kind, &op.params)?;
            let id = p.apply(parent.map(node), edit, op.note.clone())?;
            let v = payload::node_detail(p.dag(), id)?;
            emit(out, json, &v, || describe_node(&v))
        }
        Command::Branch { from, op } => {
            let mut p = open()?;
            let edit = parse_op(&op.kind, &op.params)?;
            let id = p.branch(node(*from), edit, op.note.clone())?;
            let v = payload::node_detail(p.dag(), id)?;
            emit(out, json, &v, || describe_node(&v))
        }
        Command::History => {
            let p = open()?;
            let v = payload::dag(p.name(), p.dag())?;
            emit(out, json, &v, || {
                v["nodes"].as_array().unwrap().iter().map(describe_node).collect::<Vec<_>>().join("\n")
            })
        }
        Command::Info { id } => {
            let p = open()?;
            let v = payload::node_detail(p.dag(), node(*id))?;
            emit(out, json, &v, || {
                format!(
                    "{}\n      {}x{}  {}\n      children={}",
                    describe_node(&v),
                    v["width"],
                    v["height"],
                    v["summary"].as_str().unwrap_or(""),
                    v["children"]
                )
            })
        }
        Command::Annotate { id, note } => {
            let mut p = open()?;
            p.annotate(node(*id), note.clone())?;
            let v = payload::node_detail(p.dag(), node(*id))?;
            emit(out, json, &v, || describe_node(&v))
        }
        Command::Diff {
            src,
            dst,
            frame,
            output,
            pixels,
        } => {
            let p = open()?;
            let (src, dst) = (node(*src), node(*dst));
            if *pixels {
                let a = p.dag().replay_shared(src)?;
                let b = p.dag().replay_shared(dst)?;
                let delta = imgvc_core::pixel_diff(&a, &b)?;
                let v = payload::pixel_delta(&delta);
                return emit(out, json, &v, || format!("{} of {} pixels differ", delta.count, delta.mask.len()));
            }
            let report = semantic_diff(p.dag(), src, dst)?;
            if let (Some(k), Some(path)) = (frame, output) {
                let png = report.frame(*k)?.encode(ImageFormat::Png)?;
                std::fs::write(path, png).map_err(|e| Error::io(path, e))?;
            }
            let v = payload::diff(&report)?;
            emit(out, json, &v, || {
                let mut lines = vec![format!(
                    "{} -> {}: {} steps, {} frames",
                    src,
                    dst,
                    report.steps.len(),
                    report.frame_count()
                )];
                lines.extend(report.steps.iter().map(|s| format!("  {:>4}  {}", s.node, s.summary)));
                lines.join("\n")
            })
        }
        Command::Merge { left, right } => {
            let mut p = open()?;
            let (result, id) = p.merge(node(*left), node(*right))?;
            let v = payload::merge(&result, id);
            emit(out, json, &v, || {
                format!("merged {left} and {right} into {id} (base {}, {} conflicts)", result.base, result.conflict_count)
            })
        }
        Command::Commit { message, node: head } => {
            let mut p = open()?;
            let (rev, head) = p.commit(message, head.map(node))?;
            let v = payload::commit(rev, head);
            emit(out, json, &v, || format!("committed revision {rev} (node {head})"))
        }
        Command::Push => {
            let mut p = open()?;
            p.push()?;
            emit(out, json, &json!({"status": "pushed"}), || "pushed".into())
        }
        Command::Pull => {
            let mut p = open()?;
            let report = p.pull()?;
            let v = payload::pull(&report);
            emit(out, json, &v, || v["status"].as_str().unwrap_or("").to_string())
        }
        Command::Export { id, output, format } => {
            let p = open()?;
            let format = format.as_deref().map(str::parse).transpose()?;
            let used = p.export(node(*id), output, format)?;
            let v = json!({"node": id, "path": output.display().to_string(), "format": used.name()});
            emit(out, json, &v, || format!("wrote {}", output.display()))
        }
        Command::Serve { port, ui } => {
            let p = open()?;
            crate::api::serve(p, *port, ui.clone(), |addr| {
                let _ = writeln!(out, "listening on http://{addr}");
                let _ = out.flush();
            })
        }
    }
}
