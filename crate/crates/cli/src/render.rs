//! The render pipeline shared by the command line and the HTTP service.

use linviz_core::engine::{
    compile_canonical, complexity_of, execute, execute_plan, ComplexityReport, EngineError,
    RenderOptions,
};
use linviz_core::expr::ParseError;
use linviz_core::program::{parse_program, validate_with_table, Diagnostic, VizProgram};
use linviz_core::scene::{to_svg, to_text, Device};
use linviz_core::table::{load_csv, CsvOptions, DataTable, TableError};
use serde::Serialize;
use thiserror::Error;

/// Version of the stats document layout.
pub const STATS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Stats {
    pub schema_version: u32,
    pub k_planned: u32,
    pub k_observed: u32,
    pub sort_passes: u32,
    pub certified_data_linear: bool,
    pub per_row_max: u32,
    pub table_length: usize,
    pub total_accesses: u64,
    pub pass_count: usize,
}

impl From<&ComplexityReport> for Stats {
    fn from(r: &ComplexityReport) -> Stats {
        Stats {
            schema_version: STATS_VERSION,
            k_planned: r.k_planned,
            k_observed: r.k_observed,
            sort_passes: r.sort_passes,
            certified_data_linear: complexity_of(r).certified_data_linear,
            per_row_max: r.per_row_counts.iter().copied().max().unwrap_or(0),
            table_length: r.table_length,
            total_accesses: r.total_accesses,
            pass_count: r.pass_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    pub width: f64,
    pub height: f64,
    pub cache: bool,
    /// Compile a pass plan first and run it instead of direct interpretation.
    pub plan: bool,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            width: 800.0,
            height: 600.0,
            cache: true,
            plan: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub svg: String,
    pub text: String,
    pub stats: Stats,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("program is invalid for this table")]
    Invalid(Vec<Diagnostic>),
    #[error("cannot read table: {0}")]
    Table(#[from] TableError),
    #[error("{0}")]
    Engine(EngineError),
    #[error("width and height must be at least 1 pixel")]
    Size,
}

impl From<EngineError> for RenderError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Invalid(d) => RenderError::Invalid(d),
            e => RenderError::Engine(e),
        }
    }
}

impl RenderError {
    /// Positioned problems for display next to the program text.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            RenderError::Parse(e) => vec![Diagnostic {
                line: e.line,
                col: e.col,
                message: e.message.clone(),
            }],
            RenderError::Invalid(d) => d.clone(),
            RenderError::Engine(
                EngineError::Eval { line, col, message }
                | EngineError::Order { line, col, message },
            ) => vec![Diagnostic {
                line: *line,
                col: *col,
                message: message.clone(),
            }],
            RenderError::Engine(e @ EngineError::MaxDepth { line, col, .. }) => vec![Diagnostic {
                line: *line,
                col: *col,
                message: e.to_string(),
            }],
            other => vec![Diagnostic {
                line: 0,
                col: 0,
                message: other.to_string(),
            }],
        }
    }
}

pub fn read_table(bytes: &[u8]) -> Result<DataTable, TableError> {
    load_csv(bytes, CsvOptions::default())
}

/// Parse errors and validation problems, empty when the program is usable.
pub fn check(program_text: &str, table: &DataTable) -> Vec<Diagnostic> {
    match parse_program(program_text) {
        Ok(p) => validate_with_table(&p, table),
        Err(e) => RenderError::Parse(e).diagnostics(),
    }
}

pub fn render_program(
    program: &VizProgram,
    table: &DataTable,
    settings: &RenderSettings,
) -> Result<RenderOutput, RenderError> {
    if !(settings.width >= 1.0 && settings.height >= 1.0) {
        return Err(RenderError::Size);
    }
    let opts = RenderOptions {
        device: Device {
            width: settings.width,
            height: settings.height,
        },
        cache: settings.cache,
        ..RenderOptions::default()
    };
    let r = if settings.plan {
        let plan = compile_canonical(program, table, &opts)?;
        execute_plan(&plan, table, &opts)?
    } else {
        execute(program, table, &opts)?
    };
    Ok(RenderOutput {
        svg: to_svg(&r.representation),
        text: to_text(&r.representation),
        stats: Stats::from(&r.report),
        diagnostics: r.diagnostics,
    })
}

pub fn render_text(
    program_text: &str,
    table: &DataTable,
    settings: &RenderSettings,
) -> Result<RenderOutput, RenderError> {
    let p = parse_program(program_text)?;
    render_program(&p, table, settings)
}
