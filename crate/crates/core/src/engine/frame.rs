use std::cell::RefCell;
use std::collections::HashMap;

use crate::expr::{eval, DomainScope, EvalError, Expr, Pos, Scope};
use crate::program::{Diagnostic, Node, OrderSpec, Partition, SortSpec, StateDecl, VizProgram};
use crate::scene::{Rect, Representation, DEFAULT_COLOR, DEFAULT_FONT_SIZE};
use crate::table::{DataTable, DomainStats, InstrumentedCursor, StatsScope, Value};

use super::plan::{NodeOrigin, PassSpec, ScopeMode};
use super::{ComplexityReport, EngineError, Render, RenderOptions};

/// Cap on stored runtime diagnostics; the rest are counted.
const MAX_DIAGNOSTICS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Elem {
    Row(usize),
    Group(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct Group {
    pub key: Value,
    pub rows: Vec<usize>,
    /// One value per column: numeric columns sum, text columns keep the
    /// common value or Null.
    pub agg: Vec<Value>,
}

/// The parts of a body that drive a scope's passes.
pub(crate) struct BodyInfo<'p> {
    pub filters: Vec<(&'p Expr, Pos)>,
    pub accs: Vec<&'p StateDecl>,
    pub vars: Vec<&'p StateDecl>,
    pub sort: Option<&'p SortSpec>,
    pub order: Option<&'p OrderSpec>,
    pub squarify: Option<(&'p Expr, Pos)>,
    pub margin: f64,
    pub layers: Vec<&'p Partition>,
    /// Top-level primitives and repeats, in body order.
    pub drawables: Vec<&'p Node>,
    /// Attributes normalized over the scope's own elements.
    pub local_attrs: Vec<String>,
}

impl<'p> BodyInfo<'p> {
    pub fn new(body: &'p [Node]) -> BodyInfo<'p> {
        let mut info = BodyInfo {
            filters: Vec::new(),
            accs: Vec::new(),
            vars: Vec::new(),
            sort: None,
            order: None,
            squarify: None,
            margin: 0.0,
            layers: Vec::new(),
            drawables: Vec::new(),
            local_attrs: Vec::new(),
        };
        for n in body {
            match n {
                Node::Filter(e, pos) => info.filters.push((e, *pos)),
                Node::Accumulators(d) => info.accs.extend(d.iter()),
                Node::Variables(d) => info.vars.extend(d.iter()),
                Node::Sort(s) => info.sort = Some(s),
                Node::Order(o) => info.order = Some(o),
                Node::Squarify(e, pos) => info.squarify = Some((e, *pos)),
                Node::Margin(m, _) => info.margin = *m,
                Node::Partition(p) => info.layers.push(p),
                Node::Primitive(_) | Node::Repeat(_) => {
                    info.drawables.push(n);
                    collect_local(n, &mut info.local_attrs);
                }
                Node::Children(_) => {}
            }
        }
        info
    }
}

fn collect_local(n: &Node, out: &mut Vec<String>) {
    let mut visit = |e: &Expr| {
        e.walk(&mut |x| {
            if let Expr::Norm {
                attr,
                scope: DomainScope::Local,
                ..
            } = x
            {
                if !out.contains(attr) {
                    out.push(attr.clone());
                }
            }
        })
    };
    match n {
        Node::Primitive(p) => {
            for (_, s) in &p.params {
                visit(&s.expr);
            }
            for pt in &p.points {
                visit(&pt.x.expr);
                visit(&pt.y.expr);
            }
            if let Some(crate::program::Paint::Hsv {
                hue,
                saturation,
                value,
            }) = &p.paint
            {
                for s in [hue, saturation, value].into_iter().flatten() {
                    visit(&s.expr);
                }
            }
            if let Some(s) = &p.font_size {
                visit(&s.expr);
            }
            for c in &p.children {
                collect_local(c, out);
            }
        }
        Node::Repeat(r) => {
            visit(&r.count);
            for c in &r.body {
                collect_local(c, out);
            }
        }
        _ => {}
    }
}

/// Working state kept between the passes of one pass kind.
#[derive(Default)]
pub(crate) struct Scratch {
    pub acc: Option<AccState>,
    pub group_acc: Vec<AccState>,
    pub owner: Vec<usize>,
    pub kept: Vec<usize>,
    pub group_of: HashMap<String, usize>,
    pub keys: Vec<Value>,
    pub weights: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) enum AccState {
    Value(Value),
    Sum(f64, usize),
    Extreme(f64),
}

pub(crate) struct Frame<'p> {
    pub parent: Option<usize>,
    pub origin: NodeOrigin,
    pub body: &'p [Node],
    pub info: BodyInfo<'p>,
    pub partition: Option<&'p Partition>,
    pub depth: usize,
    pub path: Vec<Value>,
    pub viewport: Rect,
    pub input: Vec<usize>,
    pub rows: Vec<usize>,
    pub mode: ScopeMode,
    pub groups: Vec<Group>,
    /// Elements in first-appearance order.
    pub base: Vec<Elem>,
    /// Iteration order as positions into `base`.
    pub order: Vec<usize>,
    pub accs: Vec<(&'p str, Value)>,
    /// Inner sort accumulators per base element.
    pub inner: Vec<Vec<(&'p str, Value)>>,
    pub local_stats: Vec<DomainStats>,
    /// Squarify tiles per iteration position, in local unit coordinates.
    pub tiles: Vec<Rect>,
    pub vars: Vec<(&'p str, Value)>,
    /// Child viewport per iteration position; None when its primitive was skipped.
    pub rects: Vec<Option<Rect>>,
    pub scratch: Scratch,
}

impl<'p> Frame<'p> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        parent: Option<usize>,
        origin: NodeOrigin,
        body: &'p [Node],
        partition: Option<&'p Partition>,
        depth: usize,
        path: Vec<Value>,
        viewport: Rect,
        input: Vec<usize>,
    ) -> Frame<'p> {
        let info = BodyInfo::new(body);
        let viewport = viewport.inset(info.margin);
        let mut f = Frame {
            parent,
            origin,
            body,
            info,
            partition,
            depth,
            path,
            viewport,
            rows: input.clone(),
            input,
            mode: ScopeMode::Pending,
            groups: Vec::new(),
            base: Vec::new(),
            order: Vec::new(),
            accs: Vec::new(),
            inner: Vec::new(),
            local_stats: Vec::new(),
            tiles: Vec::new(),
            vars: Vec::new(),
            rects: Vec::new(),
            scratch: Scratch::default(),
        };
        if partition.is_none() {
            f.use_rows();
        }
        f
    }

    /// Makes every current row an element, in row order.
    pub fn use_rows(&mut self) {
        self.mode = ScopeMode::Rows;
        self.base = self.rows.iter().map(|&r| Elem::Row(r)).collect();
        self.order = (0..self.base.len()).collect();
    }

    pub fn record_count(&self, e: Elem) -> usize {
        match e {
            Elem::Row(_) => 1,
            Elem::Group(g) => self.groups[g].rows.len(),
        }
    }
}

pub(crate) struct Machine<'p, 't> {
    pub program: &'p VizProgram,
    pub table: &'t DataTable,
    pub cursor: InstrumentedCursor<'t>,
    pub opts: RenderOptions,
    /// False while discovering a plan: instructions are not recorded.
    pub emit: bool,
    pub frames: Vec<Option<Frame<'p>>>,
    pub rep: Representation,
    pub color: (f64, f64, f64),
    pub font: f64,
    pub diagnostics: Vec<Diagnostic>,
    pub suppressed: usize,
    pub sort_passes: u32,
    pub log: Vec<PassSpec>,
    global: RefCell<HashMap<String, DomainStats>>,
}

impl<'p, 't> Machine<'p, 't> {
    pub fn new(
        program: &'p VizProgram,
        table: &'t DataTable,
        opts: RenderOptions,
        emit: bool,
    ) -> Self {
        Machine {
            program,
            table,
            cursor: InstrumentedCursor::new(table),
            opts,
            emit,
            frames: Vec::new(),
            rep: Representation::new(opts.device),
            color: DEFAULT_COLOR,
            font: DEFAULT_FONT_SIZE,
            diagnostics: Vec::new(),
            suppressed: 0,
            sort_passes: 0,
            log: Vec::new(),
            global: RefCell::new(HashMap::new()),
        }
    }

    pub fn root_frame(&self) -> Frame<'p> {
        Frame::new(
            None,
            NodeOrigin::Root,
            &self.program.root,
            None,
            0,
            Vec::new(),
            self.opts.viewport,
            (0..self.table.len()).collect(),
        )
    }

    pub fn fr(&self, f: usize) -> &Frame<'p> {
        self.frames[f]
            .as_ref()
            .expect("frame materialized before use")
    }

    pub fn fr_mut(&mut self, f: usize) -> &mut Frame<'p> {
        self.frames[f]
            .as_mut()
            .expect("frame materialized before use")
    }

    pub fn add_frame(&mut self, frame: Frame<'p>) -> usize {
        self.frames.push(Some(frame));
        self.frames.len() - 1
    }

    pub fn diag(&mut self, pos: Pos, message: impl Into<String>) {
        if !self.emit {
            return;
        }
        if self.diagnostics.len() < MAX_DIAGNOSTICS {
            self.diagnostics.push(Diagnostic {
                line: pos.line,
                col: pos.col,
                message: message.into(),
            });
        } else {
            self.suppressed += 1;
        }
    }

    pub fn ctx<'a>(
        &'a self,
        frame: usize,
        elem: Option<Elem>,
        locals: &'a [(&'p str, Value)],
    ) -> Ctx<'a, 'p, 't> {
        Ctx {
            m: self,
            frame,
            elem,
            locals,
            record_count: None,
        }
    }

    pub fn eval_at(
        &self,
        frame: usize,
        elem: Option<Elem>,
        locals: &[(&'p str, Value)],
        expr: &Expr,
        pos: Pos,
    ) -> Result<Value, EngineError> {
        eval(expr, &self.ctx(frame, elem, locals)).map_err(|e| eval_error(pos, e))
    }

    pub fn global_stats(&self, attr: &str) -> Result<DomainStats, EvalError> {
        if self.opts.cache {
            if let Some(s) = self.global.borrow().get(attr) {
                return Ok(s.clone());
            }
        }
        let s = self
            .table
            .global_stats(attr)
            .map_err(|_| EvalError::NoDomain(attr.to_string()))?;
        if self.opts.cache {
            self.global.borrow_mut().insert(attr.to_string(), s.clone());
        }
        Ok(s)
    }

    /// Numeric value of `attr` for an element.
    pub fn elem_number(&self, f: usize, e: Elem, attr: &str) -> f64 {
        let Some(c) = self.table.column_index(attr) else {
            return f64::NAN;
        };
        match e {
            Elem::Row(r) => self.table.value(r, c).as_number(),
            Elem::Group(g) => self.fr(f).groups[g].agg[c].as_number(),
        }
    }

    pub fn local_stats(&self, f: usize, attr: &str) -> Result<DomainStats, EvalError> {
        let frame = self.fr(f);
        if self.opts.cache {
            return frame
                .local_stats
                .iter()
                .find(|s| s.attribute == attr)
                .cloned()
                .ok_or_else(|| EvalError::NoDomain(attr.to_string()));
        }
        let mut values = Vec::with_capacity(frame.base.len());
        for &e in &frame.base {
            if let Elem::Row(r) = e {
                self.cursor
                    .row_access(r)
                    .map_err(|e| EvalError::Runtime(e.to_string()))?;
            }
            values.push(self.elem_number(f, e, attr));
        }
        Ok(self.scoped(f, DomainStats::from_values(attr, values)))
    }

    pub fn scoped(&self, f: usize, mut s: DomainStats) -> DomainStats {
        s.scope = StatsScope::Group(self.fr(f).path.iter().map(|v| v.to_string()).collect());
        s
    }

    /// Accumulator `name` declared directly in frame `f`, if any.
    fn accumulator(&self, f: usize, name: &str) -> Result<Option<Value>, EvalError> {
        let frame = self.fr(f);
        if self.opts.cache {
            return Ok(frame
                .accs
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| v.clone()));
        }
        let order_accs = frame
            .info
            .order
            .map(|o| o.accumulators.as_slice())
            .unwrap_or(&[]);
        let decl = frame
            .info
            .accs
            .iter()
            .copied()
            .chain(order_accs.iter())
            .find(|d| d.name == name);
        match decl {
            None => Ok(None),
            Some(d) => self
                .fold_lazily(f, d)
                .map(Some)
                .map_err(|e| EvalError::Runtime(e.to_string())),
        }
    }

    /// Recomputes an accumulator from scratch through the cursor.
    fn fold_lazily(&self, f: usize, decl: &'p StateDecl) -> Result<Value, EngineError> {
        let mut st = self.acc_init(f, decl, None)?;
        if decl.needs_pass() {
            for &e in &self.fr(f).base {
                if let Elem::Row(r) = e {
                    self.cursor.row_access(r)?;
                }
                st = self.acc_step(f, decl, st, e, None, &[])?;
            }
        }
        self.acc_finish(f, decl, st, None)
    }

    pub fn finish(self, k_planned: u32) -> Render {
        let mut diagnostics = self.diagnostics;
        if self.suppressed > 0 {
            diagnostics.push(Diagnostic {
                line: 0,
                col: 0,
                message: format!("{} further diagnostics suppressed", self.suppressed),
            });
        }
        Render {
            representation: self.rep,
            report: ComplexityReport::new(
                self.cursor.counts(),
                k_planned,
                self.sort_passes,
                self.log.len(),
            ),
            diagnostics,
        }
    }
}

pub(crate) fn eval_error(pos: Pos, e: EvalError) -> EngineError {
    EngineError::Eval {
        line: pos.line,
        col: pos.col,
        message: e.to_string(),
    }
}

pub(crate) struct Ctx<'a, 'p, 't> {
    pub m: &'a Machine<'p, 't>,
    pub frame: usize,
    pub elem: Option<Elem>,
    pub locals: &'a [(&'p str, Value)],
    /// Overrides `recordCount`, for folds over one group's rows.
    pub record_count: Option<usize>,
}

impl Scope for Ctx<'_, '_, '_> {
    fn attribute(&self, name: &str) -> Result<Value, EvalError> {
        let table = self.m.table;
        let col = table
            .column_index(name)
            .ok_or_else(|| EvalError::UnknownAttribute(name.to_string()))?;
        match self.elem {
            None => Err(EvalError::NoCurrentRow(name.to_string())),
            Some(Elem::Row(r)) => Ok(table.value(r, col)),
            Some(Elem::Group(g)) => Ok(self.m.fr(self.frame).groups[g].agg[col].clone()),
        }
    }

    fn identifier(&self, name: &str) -> Result<Value, EvalError> {
        if let Some((_, v)) = self.locals.iter().rev().find(|(n, _)| *n == name) {
            return Ok(v.clone());
        }
        let mut f = Some(self.frame);
        while let Some(id) = f {
            if let Some(v) = self.m.accumulator(id, name)? {
                return Ok(v);
            }
            f = self.m.fr(id).parent;
        }
        let frame = self.m.fr(self.frame);
        let n = match name {
            "Length" => frame.rows.len(),
            "depth" => frame.depth,
            "childCount" => frame.base.len(),
            "recordCount" => match (self.record_count, self.elem) {
                (Some(c), _) => c,
                (None, Some(e)) => frame.record_count(e),
                (None, None) => frame.rows.len(),
            },
            _ => return Err(EvalError::UnresolvedIdentifier(name.to_string())),
        };
        Ok(Value::Number(n as f64))
    }

    fn domain(&self, attribute: &str, scope: DomainScope) -> Result<DomainStats, EvalError> {
        match scope {
            DomainScope::Global => self.m.global_stats(attribute),
            DomainScope::Local => self.m.local_stats(self.frame, attribute),
        }
    }
}

/// True for area primitives, whose rect becomes a viewport.
pub(crate) fn is_area(n: &Node) -> bool {
    matches!(n, Node::Primitive(p) if p.kind.is_area())
}
