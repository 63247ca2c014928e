//! Execution of programs over tables.
//!
//! A render walks a tree of scopes. Each scope owns a row subset, a viewport
//! and a body, and runs a fixed sequence of passes over its elements (rows,
//! or groups once partitioned). Two drivers share the pass implementations:
//! [`execute`] recurses directly, while [`compile_canonical`] records the
//! flat schedule of passes for one table and [`execute_plan`] replays it
//! through the generic pass loop.

mod frame;
mod order;
mod output;
mod passes;
mod plan;
mod squarify;

use serde::Serialize;
use thiserror::Error;

use crate::program::{resolve_mappings, validate_with_table, Diagnostic, VizProgram};
use crate::scene::{Device, Rect, Representation};
use crate::table::{DataTable, TableError};

pub use order::{order_from_result, sort_order, OrderError};
pub use plan::{NodeOrigin, PassKind, PassPlan, PassSpec, PlanNode, ScopeMode};
pub use squarify::{squarify, worst_aspect};

/// Knobs that do not change the program's meaning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub device: Device,
    pub viewport: Rect,
    /// Memoize accumulators and domain statistics. Output never depends on it.
    pub cache: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            device: Device {
                width: 800.0,
                height: 600.0,
            },
            viewport: Rect::UNIT,
            cache: true,
        }
    }
}

impl RenderOptions {
    pub fn with_device(width: f64, height: f64) -> Self {
        RenderOptions {
            device: Device { width, height },
            ..RenderOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ComplexityReport {
    pub per_row_counts: Vec<u32>,
    pub k_observed: u32,
    /// Upper bound on accesses of any single row implied by the pass schedule.
    pub k_planned: u32,
    pub sort_passes: u32,
    pub table_length: usize,
    pub total_accesses: u64,
    /// Number of passes in the schedule, including those that touch no row.
    pub pass_count: usize,
}

impl ComplexityReport {
    pub(crate) fn new(
        counts: Vec<u32>,
        k_planned: u32,
        sort_passes: u32,
        pass_count: usize,
    ) -> Self {
        ComplexityReport {
            k_observed: counts.iter().copied().max().unwrap_or(0),
            total_accesses: counts.iter().map(|&c| u64::from(c)).sum(),
            table_length: counts.len(),
            per_row_counts: counts,
            k_planned,
            sort_passes,
            pass_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Complexity {
    pub k_observed: u32,
    pub certified_data_linear: bool,
}

/// Certified iff no comparison sort ran and no row was read more often than
/// the schedule allows.
pub fn complexity_of(report: &ComplexityReport) -> Complexity {
    Complexity {
        k_observed: report.k_observed,
        certified_data_linear: report.sort_passes == 0 && report.k_observed <= report.k_planned,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Render {
    pub representation: Representation,
    pub report: ComplexityReport,
    /// Non-fatal problems such as primitives skipped for NaN parameters.
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EngineError {
    #[error("program is invalid for this table: {}", first(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("{line}:{col}: {message}")]
    Eval {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: Order result {message}")]
    Order {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: partition makes no progress at depth {depth} (MaxDepth reached)")]
    MaxDepth {
        line: usize,
        col: usize,
        depth: usize,
    },
    #[error("plan does not match the table: {0}")]
    PlanMismatch(String),
    #[error(transparent)]
    Table(#[from] TableError),
}

fn first(d: &[Diagnostic]) -> String {
    match d {
        [] => "no diagnostics".to_string(),
        [one] => one.to_string(),
        [one, rest @ ..] => format!("{one} (and {} more)", rest.len()),
    }
}

/// Validates `program` against `table` and resolves implicit mappings.
pub fn prepare(program: &VizProgram, table: &DataTable) -> Result<VizProgram, EngineError> {
    let diags = validate_with_table(program, table);
    if !diags.is_empty() {
        return Err(EngineError::Invalid(diags));
    }
    let mut p = program.clone();
    resolve_mappings(&mut p, table.schema());
    Ok(p)
}

/// Direct recursive interpretation.
pub fn execute(
    program: &VizProgram,
    table: &DataTable,
    opts: &RenderOptions,
) -> Result<Render, EngineError> {
    let prepared = prepare(program, table)?;
    let mut m = frame::Machine::new(&prepared, table, *opts, true);
    m.run_direct()?;
    let k_planned = m.planned_bound();
    Ok(m.finish(k_planned))
}

/// Discovers the scope tree and pass schedule of `program` on `table`.
pub fn compile_canonical(
    program: &VizProgram,
    table: &DataTable,
    opts: &RenderOptions,
) -> Result<PassPlan, EngineError> {
    plan::compile(prepare(program, table)?, table, opts)
}

/// Runs a compiled schedule through the generic pass loop.
pub fn execute_plan(
    plan: &PassPlan,
    table: &DataTable,
    opts: &RenderOptions,
) -> Result<Render, EngineError> {
    plan::execute(plan, table, opts)
}
