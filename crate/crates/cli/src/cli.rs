//! Command-line front end. [`run`] never exits the process, so tests can
//! drive it in-process and inspect exit codes and output.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use linviz_core::gallery::{gallery_entry, list_gallery, DEFAULT_ROWS, DEFAULT_SEED};
use linviz_core::program::Diagnostic;

use crate::render::{check, read_table, render_text, RenderSettings};
use crate::server::{serve, ServerConfig};

/// Program or table rejected: parse, validation or evaluation failure.
pub const EXIT_INVALID: i32 = 1;
/// A file could not be read or written, or the service could not start.
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "linviz",
    version,
    about = "Render dataflow visualization programs over CSV tables"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a program over a table to SVG.
    Render(RenderArgs),
    /// Parse and validate a program against a table's schema.
    Check(CheckArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// List built-in programs, or export one with its dataset.
    Gallery(GalleryArgs),
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub program: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 800.0)]
    pub width: f64,
    #[arg(long, default_value_t = 600.0)]
    pub height: f64,
    /// Also write the instruction listing here.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Also write the complexity report here as JSON.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Recompute accumulators and statistics on every use.
    #[arg(long)]
    pub no_cache: bool,
    /// Compile a pass plan and execute it.
    #[arg(long)]
    pub plan: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub program: PathBuf,
    /// CSV whose schema and values the program is checked against.
    #[arg(long)]
    pub schema_from: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "VIZ_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Largest accepted request body, in bytes.
    #[arg(long, default_value_t = crate::server::DEFAULT_BODY_LIMIT)]
    pub body_limit: usize,
    /// Render time budget, in seconds.
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,
}

#[derive(Debug, Args)]
pub struct GalleryArgs {
    /// Entry to export; lists all entries when absent.
    pub name: Option<String>,
    #[arg(long, requires = "name")]
    pub program_out: Option<PathBuf>,
    #[arg(long, requires = "name")]
    pub data_out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ROWS)]
    pub rows: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

/// Failure with its exit code; the message has already been formatted.
struct Failure(i32, String);

fn io(what: &str, path: &Path, e: std::io::Error) -> Failure {
    Failure(EXIT_IO, format!("cannot {what} {}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io("read", path, e))
}

fn write(path: &Path, data: &str) -> Result<(), Failure> {
    fs::write(path, data).map_err(|e| io("write", path, e))
}

fn located(path: &Path, diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("{}:{d}", path.display()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Runs the command line `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Render(a) => cmd_render(&a, err),
        Command::Check(a) => cmd_check(&a, out),
        Command::Serve(a) => cmd_serve(&a, err),
        Command::Gallery(a) => cmd_gallery(&a, out),
    };
    match result {
        Ok(()) => 0,
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "{msg}");
            code
        }
    }
}

fn cmd_render(a: &RenderArgs, err: &mut dyn Write) -> Result<(), Failure> {
    let text = read_text(&a.program)?;
    let bytes = fs::read(&a.data).map_err(|e| io("read", &a.data, e))?;
    let table = read_table(&bytes)
        .map_err(|e| Failure(EXIT_INVALID, format!("{}: {e}", a.data.display())))?;
    let settings = RenderSettings {
        width: a.width,
        height: a.height,
        cache: !a.no_cache,
        plan: a.plan,
    };
    let r = render_text(&text, &table, &settings).map_err(|e| {
        let mut msg = located(&a.program, &e.diagnostics());
        if msg.is_empty() {
            msg = e.to_string();
        }
        Failure(EXIT_INVALID, msg)
    })?;
    if !r.diagnostics.is_empty() {
        let _ = writeln!(err, "{}", located(&a.program, &r.diagnostics));
    }
    write(&a.out, &r.svg)?;
    if let Some(p) = &a.dump {
        write(p, &r.text)?;
    }
    if let Some(p) = &a.stats {
        let json = serde_json::to_string_pretty(&r.stats).expect("stats serialize");
        write(p, &(json + "\n"))?;
    }
    Ok(())
}

fn cmd_check(a: &CheckArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let text = read_text(&a.program)?;
    let bytes = fs::read(&a.schema_from).map_err(|e| io("read", &a.schema_from, e))?;
    let table = read_table(&bytes)
        .map_err(|e| Failure(EXIT_INVALID, format!("{}: {e}", a.schema_from.display())))?;
    let diags = check(&text, &table);
    if diags.is_empty() {
        let _ = writeln!(out, "{}: ok", a.program.display());
        Ok(())
    } else {
        let _ = writeln!(out, "{}", located(&a.program, &diags));
        Err(Failure(
            EXIT_INVALID,
            format!("{} problem(s) found", diags.len()),
        ))
    }
}

fn cmd_serve(a: &ServeArgs, err: &mut dyn Write) -> Result<(), Failure> {
    let config = ServerConfig {
        body_limit: a.body_limit,
        render_timeout: std::time::Duration::from_secs(a.timeout_secs),
    };
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| Failure(EXIT_IO, format!("cannot start runtime: {e}")))?;
    let addr = format!("{}:{}", a.host, a.port);
    let _ = writeln!(err, "listening on http://{addr}");
    runtime
        .block_on(serve(&addr, config))
        .map_err(|e| Failure(EXIT_IO, format!("server error on {addr}: {e}")))
}

fn cmd_gallery(a: &GalleryArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let Some(name) = &a.name else {
        for e in list_gallery() {
            let _ = writeln!(out, "{:<30} {:<9} {}", e.name, e.dataset.name(), e.title);
        }
        return Ok(());
    };
    let e = gallery_entry(name)
        .ok_or_else(|| Failure(EXIT_INVALID, format!("no gallery entry named `{name}`")))?;
    match &a.program_out {
        Some(p) => write(p, &e.program)?,
        None if a.data_out.is_none() => {
            let _ = write!(out, "{}", e.program);
        }
        None => {}
    }
    if let Some(p) = &a.data_out {
        let csv = e
            .table(a.rows.max(1), a.seed)
            .to_csv()
            .map_err(|e| Failure(EXIT_IO, e.to_string()))?;
        write(p, &csv)?;
    }
    Ok(())
}
