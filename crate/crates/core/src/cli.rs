//! Command-line front end. Machine output goes to the given writer; logs go
//! to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{BackendKind, Config, Overrides, CONFIG_DIR};
use crate::eval::{generation_index, select_corpus, write_reports};
use crate::graph::rooted_graph;
use crate::service::{read_feedback, serve, FEEDBACK_FILE};
use crate::workspace::{evaluate, generate, Workspace, WorkspaceError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "smartdoc", version, about = "Call-graph-aware JavaDoc generation for Java projects")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Config file (default: <root>/.smartdoc/config.toml if present).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub backend: Option<BackendKind>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub max_retries: Option<usize>,
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
    /// Edit files in place instead of printing diffs.
    #[arg(long, global = true)]
    pub write: bool,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

impl clap::ValueEnum for BackendKind {
    fn value_variants<'a>() -> &'a [Self] {
        &[BackendKind::Mock, BackendKind::Http]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            BackendKind::Mock => "mock",
            BackendKind::Http => "http",
        }))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List every parsed method with its file and doc flag.
    Scan {
        #[arg(default_value = ".")]
        root: PathBuf,
    },
    /// Generate JavaDoc for one method or every undocumented one.
    Gen {
        #[arg(default_value = ".")]
        root: PathBuf,
        #[arg(long, conflicts_with = "all", required_unless_present = "all")]
        method: Option<String>,
        #[arg(long)]
        all: bool,
    },
    /// Regenerate existing comments and score them against the originals.
    Eval {
        #[arg(default_value = ".")]
        root: PathBuf,
        #[arg(long)]
        emit_plot_data: bool,
        /// Keep @tag names when scoring.
        #[arg(long)]
        raw_tokens: bool,
    },
    /// Run the local review service.
    Serve {
        #[arg(default_value = ".")]
        root: PathBuf,
        #[arg(long)]
        port: Option<u16>,
    },
    /// Print the call graph below a method as JSON.
    Graph {
        #[arg(default_value = ".")]
        root: PathBuf,
        #[arg(long)]
        method: String,
    },
    /// Feedback log utilities.
    Feedback {
        #[command(subcommand)]
        action: FeedbackAction,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExportFormat {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum FeedbackAction {
    /// Validate and print the feedback log.
    Export {
        #[arg(default_value = ".")]
        root: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: ExportFormat,
    },
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_USAGE, message: message.to_string() }
}

fn runtime(message: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_PARTIAL, message: message.to_string() }
}

impl From<WorkspaceError> for Failure {
    fn from(e: WorkspaceError) -> Self {
        match e {
            WorkspaceError::Patch(_) => runtime(e),
            _ => usage(e),
        }
    }
}

fn overrides(g: &GlobalArgs, port: Option<u16>, raw_tokens: Option<bool>) -> Overrides {
    Overrides {
        backend: g.backend,
        model: g.model.clone(),
        endpoint: g.endpoint.clone(),
        max_retries: g.max_retries,
        depth: g.depth,
        concurrency: g.concurrency,
        port,
        raw_tokens,
    }
}

fn load_config(root: &Path, g: &GlobalArgs, o: &Overrides) -> Result<Config, Failure> {
    if !root.is_dir() {
        return Err(usage(format!("project root {} is not a directory", root.display())));
    }
    let mut config = Config::discover(root, g.config.as_deref()).map_err(usage)?;
    config.apply(o);
    config.validate().map_err(usage)?;
    Ok(config)
}

fn open(root: &Path, g: &GlobalArgs, o: Overrides) -> Result<Workspace, Failure> {
    let config = load_config(root, g, &o)?;
    let ws = Workspace::open(root, config)?;
    for d in &ws.project.diagnostics {
        log::warn!("{d}");
    }
    for d in &ws.index.diagnostics {
        log::warn!("{d}");
    }
    Ok(ws)
}

fn out_err(e: std::io::Error) -> Failure {
    runtime(format!("cannot write output: {e}"))
}

fn runtime_handle() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(runtime)
}

fn cmd_scan(g: &GlobalArgs, root: &Path, out: &mut dyn Write) -> Result<i32, Failure> {
    let ws = open(root, g, overrides(g, None, None))?;
    writeln!(out, "method_id\tfile\thas_doc").map_err(out_err)?;
    for m in ws.index.methods.values() {
        writeln!(out, "{}\t{}\t{}", m.id, m.file, m.doc_comment.is_some()).map_err(out_err)?;
    }
    Ok(EXIT_OK)
}

fn cmd_gen(g: &GlobalArgs, root: &Path, method: Option<&str>, out: &mut dyn Write) -> Result<i32, Failure> {
    let ws = open(root, g, overrides(g, None, None))?;
    let engine = ws.engine()?;
    let targets = match method {
        Some(m) => vec![ws.resolve_method(m)?],
        None => engine.undocumented(),
    };
    if targets.is_empty() {
        log::info!("nothing to generate");
        return Ok(EXIT_OK);
    }
    let report = runtime_handle()?.block_on(generate(&ws, &engine, &targets));
    if g.write {
        report.write(&ws)?;
        for f in &report.files {
            writeln!(out, "{}", ws.source_path(&f.file).display()).map_err(out_err)?;
        }
    } else if let Some(dir) = &g.out_dir {
        for p in report.write_diffs(dir)? {
            writeln!(out, "{}", p.display()).map_err(out_err)?;
        }
    } else {
        out.write_all(report.combined_diff().as_bytes()).map_err(out_err)?;
    }
    let failed = report.failures();
    log::info!("{} of {} targets succeeded", targets.len() - failed, targets.len());
    Ok(if failed > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

fn cmd_eval(
    g: &GlobalArgs,
    root: &Path,
    emit_plot_data: bool,
    raw_tokens: bool,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let ws = open(root, g, overrides(g, None, raw_tokens.then_some(true)))?;
    let corpus = select_corpus(&ws.index, &ws.config.corpus_options()).map_err(usage)?;
    log::info!("evaluating {} methods", corpus.len());
    let engine = ws.engine_over(Arc::new(generation_index(&ws.index, &corpus)))?;
    let embedder = ws.embedder()?;
    let output = runtime_handle()?.block_on(evaluate(&ws, &engine, embedder.as_ref(), &corpus));
    let out_dir = g.out_dir.clone().unwrap_or_else(|| ws.root.join(CONFIG_DIR).join("eval"));
    let written = write_reports(&out_dir, &output.results, &output.reports, &output.manifest, emit_plot_data)
        .map_err(runtime)?;
    for p in written {
        writeln!(out, "{}", p.display()).map_err(out_err)?;
    }
    Ok(if output.manifest.failures > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

fn cmd_serve(g: &GlobalArgs, root: &Path, port: Option<u16>) -> Result<i32, Failure> {
    let ws = open(root, g, overrides(g, port, None))?;
    let engine = ws.engine()?;
    let port = ws.config.port;
    runtime_handle()?.block_on(serve(Arc::new(ws), engine, port)).map_err(usage)?;
    Ok(EXIT_OK)
}

fn cmd_graph(g: &GlobalArgs, root: &Path, method: &str, out: &mut dyn Write) -> Result<i32, Failure> {
    let ws = open(root, g, overrides(g, None, None))?;
    let id = ws.resolve_method(method)?;
    let graph = rooted_graph(&ws.graph, &id, ws.config.depth).map_err(usage)?;
    let json = serde_json::to_string_pretty(&graph).expect("graph serializes");
    writeln!(out, "{json}").map_err(out_err)?;
    Ok(EXIT_OK)
}

fn cmd_feedback_export(root: &Path, format: ExportFormat, out: &mut dyn Write) -> Result<i32, Failure> {
    if !root.is_dir() {
        return Err(usage(format!("project root {} is not a directory", root.display())));
    }
    let records = read_feedback(&root.join(CONFIG_DIR).join(FEEDBACK_FILE)).map_err(runtime)?;
    match format {
        ExportFormat::Json => {
            let json = serde_json::to_string_pretty(&records).expect("records serialize");
            writeln!(out, "{json}").map_err(out_err)?;
        }
        ExportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in &records {
                w.serialize(r).map_err(runtime)?;
            }
            w.flush().map_err(out_err)?;
        }
    }
    Ok(EXIT_OK)
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> i32 {
    let g = &cli.global;
    let result = match &cli.command {
        Command::Scan { root } => cmd_scan(g, root, out),
        Command::Gen { root, method, .. } => cmd_gen(g, root, method.as_deref(), out),
        Command::Eval { root, emit_plot_data, raw_tokens } => cmd_eval(g, root, *emit_plot_data, *raw_tokens, out),
        Command::Serve { root, port } => cmd_serve(g, root, *port),
        Command::Graph { root, method } => cmd_graph(g, root, method, out),
        Command::Feedback { action: FeedbackAction::Export { root, format } } => cmd_feedback_export(root, *format, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Parses `args` (including the program name) and runs. Usage errors exit
/// with code 2.
pub fn run_from<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
