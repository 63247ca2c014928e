//! Canonical pass schedules.
//!
//! A plan is the flat, ordered list of passes a render performs on one table,
//! with the scope tree they belong to. Every pass has the same shape: an
//! order input (the element list), per-pass output and initialization, per
//! element output and iteration, then per-pass post output. Only the element
//! loop reads rows, and it reads each listed row once.

use serde::Serialize;

use crate::program::VizProgram;
use crate::table::DataTable;

use super::frame::Machine;
use super::{EngineError, Render, RenderOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScopeMode {
    /// Not yet partitioned.
    Pending,
    /// Elements are rows.
    Rows,
    /// Elements are partition groups.
    Groups,
    /// Nothing left to draw.
    Leaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeOrigin {
    Root,
    /// The j-th `Partition` node of the parent's body.
    Layer(usize),
    /// The group at this iteration position of the parent.
    Group(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PassKind {
    Filter,
    Partition,
    LocalStats,
    Accumulator(usize),
    SortInner(usize),
    SortKey,
    OrderAccumulator(usize),
    OrderResult,
    Weights,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PassSpec {
    pub node: usize,
    pub kind: PassKind,
    pub touches_rows: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanNode {
    pub parent: Option<usize>,
    pub origin: NodeOrigin,
    pub depth: usize,
    pub path: Vec<String>,
    pub input_rows: usize,
    pub mode: ScopeMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassPlan {
    /// Validated program with implicit mappings resolved.
    pub program: VizProgram,
    pub nodes: Vec<PlanNode>,
    pub passes: Vec<PassSpec>,
    pub k_planned: u32,
    /// Comparison sorts in the schedule; nonzero plans certify nothing.
    pub sort_passes: u32,
}

impl PassPlan {
    pub fn certifying(&self) -> bool {
        self.sort_passes == 0
    }
}

/// Most reads any row can receive: passes of a node that read rows, plus all
/// of its layers (same rows), plus the worst of its groups (disjoint rows).
pub(crate) fn bound(nodes: &[(Option<usize>, NodeOrigin)], passes: &[PassSpec]) -> u32 {
    let n = nodes.len();
    let mut own = vec![0u32; n];
    for p in passes {
        if p.touches_rows {
            own[p.node] += 1;
        }
    }
    let mut layers = vec![0u32; n];
    let mut groups = vec![0u32; n];
    let mut total = vec![0u32; n];
    // Children always have larger ids than their parents.
    for id in (0..n).rev() {
        total[id] = own[id] + layers[id] + groups[id];
        if let (Some(parent), origin) = nodes[id] {
            match origin {
                NodeOrigin::Group(_) => groups[parent] = groups[parent].max(total[id]),
                _ => layers[parent] += total[id],
            }
        }
    }
    total.first().copied().unwrap_or(0)
}

fn shape<'p>(m: &Machine<'p, '_>) -> Vec<(Option<usize>, NodeOrigin)> {
    m.frames
        .iter()
        .map(|f| {
            let f = f.as_ref().expect("discovery materializes every scope");
            (f.parent, f.origin)
        })
        .collect()
}

impl<'p, 't> Machine<'p, 't> {
    pub(crate) fn planned_bound(&self) -> u32 {
        bound(&shape(self), &self.log)
    }
}

pub(super) fn compile(
    program: VizProgram,
    table: &DataTable,
    opts: &RenderOptions,
) -> Result<PassPlan, EngineError> {
    let opts = RenderOptions {
        cache: true,
        ..*opts
    };
    let (nodes, passes, k_planned, sort_passes) = {
        let mut m = Machine::new(&program, table, opts, false);
        m.run_direct()?;
        let nodes = m
            .frames
            .iter()
            .map(|f| {
                let f = f.as_ref().expect("discovery materializes every scope");
                PlanNode {
                    parent: f.parent,
                    origin: f.origin,
                    depth: f.depth,
                    path: f.path.iter().map(|v| v.to_string()).collect(),
                    input_rows: f.input.len(),
                    mode: f.mode,
                }
            })
            .collect();
        (nodes, m.log.clone(), m.planned_bound(), m.sort_passes)
    };
    Ok(PassPlan {
        program,
        nodes,
        passes,
        k_planned,
        sort_passes,
    })
}

pub(super) fn execute(
    plan: &PassPlan,
    table: &DataTable,
    opts: &RenderOptions,
) -> Result<Render, EngineError> {
    let opts = RenderOptions {
        cache: true,
        ..*opts
    };
    let mut m = Machine::new(&plan.program, table, opts, true);
    m.frames = (0..plan.nodes.len()).map(|_| None).collect();
    for spec in &plan.passes {
        materialize(&mut m, plan, spec.node)?;
        m.run_pass(spec.node, spec.kind)?;
        if spec.kind == PassKind::Partition && m.fr(spec.node).mode != plan.nodes[spec.node].mode {
            return Err(EngineError::PlanMismatch(format!(
                "scope {} partitions differently",
                spec.node
            )));
        }
    }
    if m.log.as_slice() != plan.passes.as_slice() {
        return Err(EngineError::PlanMismatch("pass schedule diverged".into()));
    }
    Ok(m.finish(plan.k_planned))
}

/// Builds the scope for plan node `n` from its parent's finished state.
fn materialize(m: &mut Machine<'_, '_>, plan: &PassPlan, n: usize) -> Result<(), EngineError> {
    if m.frames[n].is_some() {
        return Ok(());
    }
    let node = &plan.nodes[n];
    let frame = match (node.origin, node.parent) {
        (NodeOrigin::Root, _) => m.root_frame(),
        (NodeOrigin::Layer(j), Some(p)) => {
            materialize(m, plan, p)?;
            m.make_layer(p, j)
        }
        (NodeOrigin::Group(pos), Some(p)) => {
            materialize(m, plan, p)?;
            m.make_child(p, pos)
                .ok_or_else(|| EngineError::PlanMismatch(format!("scope {n} has no viewport")))?
        }
        _ => {
            return Err(EngineError::PlanMismatch(format!(
                "scope {n} has no parent"
            )))
        }
    };
    if frame.input.len() != node.input_rows {
        return Err(EngineError::PlanMismatch(format!(
            "scope {n} expects {} rows, found {}",
            node.input_rows,
            frame.input.len()
        )));
    }
    m.frames[n] = Some(frame);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pass(node: usize, touches: bool) -> PassSpec {
        PassSpec {
            node,
            kind: PassKind::Output,
            touches_rows: touches,
        }
    }

    #[test]
    fn layers_add_and_groups_take_the_maximum() {
        let nodes = [
            (None, NodeOrigin::Root),
            (Some(0), NodeOrigin::Layer(0)),
            (Some(1), NodeOrigin::Group(0)),
            (Some(1), NodeOrigin::Group(1)),
            (Some(0), NodeOrigin::Layer(1)),
        ];
        let passes = [
            pass(0, true),
            pass(1, true),
            pass(1, false),
            pass(2, true),
            pass(3, true),
            pass(3, true),
            pass(4, true),
        ];
        // root 1 + layer(1 + max(1, 2)) + layer 1
        assert_eq!(bound(&nodes, &passes), 5);
        assert_eq!(bound(&[], &[]), 0);
    }
}
