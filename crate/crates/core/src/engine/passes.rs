use crate::expr::eval;
use crate::program::{Aggregate, ChildCase, Node, Segment, StateDecl, StateKind};
use crate::scene::Rect;
use crate::table::{format_number, Column, DomainStats, Value};

use super::frame::{AccState, Elem, Frame, Group, Machine};
use super::order::{order_from_result, sort_order};
use super::plan::{NodeOrigin, PassKind, PassSpec, ScopeMode};
use super::squarify::squarify;
use super::EngineError;

impl<'p, 't> Machine<'p, 't> {
    pub fn run_direct(&mut self) -> Result<(), EngineError> {
        let root = self.root_frame();
        let id = self.add_frame(root);
        self.run_frame(id)
    }

    /// Runs every pass of scope `f`, then its layers, then its group children.
    fn run_frame(&mut self, f: usize) -> Result<(), EngineError> {
        if !self.fr(f).info.filters.is_empty() {
            self.run_pass(f, PassKind::Filter)?;
        }
        if self.fr(f).partition.is_some() {
            let frame = self.fr_mut(f);
            if frame.depth > 0 && frame.rows.is_empty() {
                frame.mode = ScopeMode::Leaf;
                return Ok(());
            }
            self.run_pass(f, PassKind::Partition)?;
            if self.fr(f).mode == ScopeMode::Leaf {
                return Ok(());
            }
        }
        for kind in self.schedule_after_partition(f) {
            self.run_pass(f, kind)?;
        }
        for j in 0..self.fr(f).info.layers.len() {
            let layer = self.make_layer(f, j);
            let id = self.add_frame(layer);
            self.run_frame(id)?;
        }
        if self.fr(f).mode == ScopeMode::Groups {
            for pos in 0..self.fr(f).order.len() {
                if let Some(child) = self.make_child(f, pos) {
                    let id = self.add_frame(child);
                    self.run_frame(id)?;
                }
            }
        }
        Ok(())
    }

    /// Passes that follow partitioning, in execution order.
    fn schedule_after_partition(&self, f: usize) -> Vec<PassKind> {
        let frame = self.fr(f);
        let info = &frame.info;
        let cache = self.opts.cache;
        let groups = frame.mode == ScopeMode::Groups;
        let mut v = Vec::new();
        if cache && !info.local_attrs.is_empty() {
            v.push(PassKind::LocalStats);
        }
        if cache {
            v.extend((0..info.accs.len()).map(PassKind::Accumulator));
        }
        if let Some(s) = info.sort {
            if groups {
                v.extend((0..s.inner.len()).map(PassKind::SortInner));
            }
            v.push(PassKind::SortKey);
        } else if let Some(o) = info.order {
            if cache {
                v.extend((0..o.accumulators.len()).map(PassKind::OrderAccumulator));
            }
            v.push(PassKind::OrderResult);
        } else if info.squarify.is_some() {
            v.push(PassKind::Weights);
        }
        if groups || !info.drawables.is_empty() {
            v.push(PassKind::Output);
        }
        v
    }

    /// The generic pass loop: order input, per-pass work, then per element an
    /// access (rows only), output and iteration, then per-pass post work.
    pub fn run_pass(&mut self, f: usize, kind: PassKind) -> Result<(), EngineError> {
        let elems = self.pass_elements(f, kind);
        self.pass_begin(f, kind)?;
        for (pos, &e) in elems.iter().enumerate() {
            if let Elem::Row(r) = e {
                self.cursor.row_access(r)?;
            }
            self.pass_step(f, kind, pos, e)?;
        }
        self.pass_end(f, kind)?;
        self.log.push(PassSpec {
            node: f,
            kind,
            touches_rows: elems.iter().any(|e| matches!(e, Elem::Row(_))),
        });
        Ok(())
    }

    fn pass_elements(&mut self, f: usize, kind: PassKind) -> Vec<Elem> {
        let frame = self.fr_mut(f);
        match kind {
            PassKind::Filter => frame.input.iter().map(|&r| Elem::Row(r)).collect(),
            PassKind::Partition => frame.rows.iter().map(|&r| Elem::Row(r)).collect(),
            PassKind::Accumulator(i) if !frame.info.accs[i].needs_pass() => Vec::new(),
            PassKind::OrderAccumulator(i)
                if !frame.info.order.expect("order pass").accumulators[i].needs_pass() =>
            {
                Vec::new()
            }
            PassKind::LocalStats
            | PassKind::Accumulator(_)
            | PassKind::OrderAccumulator(_)
            | PassKind::SortKey
            | PassKind::Weights => frame.base.clone(),
            PassKind::SortInner(_) => {
                let mut owner = Vec::new();
                let mut elems = Vec::new();
                for (pos, e) in frame.base.iter().enumerate() {
                    if let Elem::Group(g) = e {
                        for &r in &frame.groups[*g].rows {
                            owner.push(pos);
                            elems.push(Elem::Row(r));
                        }
                    }
                }
                frame.scratch.owner = owner;
                elems
            }
            PassKind::OrderResult => Vec::new(),
            PassKind::Output => frame.order.iter().map(|&p| frame.base[p]).collect(),
        }
    }

    fn pass_begin(&mut self, f: usize, kind: PassKind) -> Result<(), EngineError> {
        match kind {
            PassKind::Filter => self.fr_mut(f).scratch.kept.clear(),
            PassKind::Partition => {
                let frame = self.fr_mut(f);
                frame.groups.clear();
                frame.scratch.group_of.clear();
            }
            PassKind::LocalStats => {
                let n = self.fr(f).info.local_attrs.len();
                self.fr_mut(f).scratch.bounds = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
            }
            PassKind::Accumulator(i) => {
                let decl = self.fr(f).info.accs[i];
                let st = self.acc_init(f, decl, None)?;
                self.fr_mut(f).scratch.acc = Some(st);
            }
            PassKind::OrderAccumulator(i) => {
                let decl = &self.fr(f).info.order.expect("order pass").accumulators[i];
                let st = self.acc_init(f, decl, None)?;
                self.fr_mut(f).scratch.acc = Some(st);
            }
            PassKind::SortInner(j) => {
                let frame = self.fr(f);
                let decl = &frame.info.sort.expect("sort pass").inner[j];
                if j == 0 {
                    let n = frame.base.len();
                    self.fr_mut(f).inner = vec![Vec::new(); n];
                }
                let frame = self.fr(f);
                let mut states = Vec::with_capacity(frame.base.len());
                for &e in &frame.base {
                    states.push(self.acc_init(f, decl, Some(frame.record_count(e)))?);
                }
                self.fr_mut(f).scratch.group_acc = states;
            }
            PassKind::SortKey => self.fr_mut(f).scratch.keys.clear(),
            PassKind::OrderResult => {
                let order = self.fr(f).info.order.expect("order pass");
                let v = self.eval_at(f, None, &[], &order.result, order.pos)?;
                let m = self.fr(f).base.len();
                let perm = order_from_result(&v, m).map_err(|e| EngineError::Order {
                    line: order.pos.line,
                    col: order.pos.col,
                    message: e.to_string(),
                })?;
                self.fr_mut(f).order = perm;
            }
            PassKind::Weights => self.fr_mut(f).scratch.weights.clear(),
            PassKind::Output => self.output_begin(f)?,
        }
        Ok(())
    }

    fn pass_step(
        &mut self,
        f: usize,
        kind: PassKind,
        pos: usize,
        e: Elem,
    ) -> Result<(), EngineError> {
        match kind {
            PassKind::Filter => {
                let frame = self.fr(f);
                let mut keep = true;
                for (expr, p) in &frame.info.filters {
                    if !self.eval_at(f, Some(e), &[], expr, *p)?.truthy() {
                        keep = false;
                        break;
                    }
                }
                if keep {
                    let Elem::Row(r) = e else {
                        unreachable!("filters run over rows")
                    };
                    self.fr_mut(f).scratch.kept.push(r);
                }
            }
            PassKind::Partition => self.partition_step(f, e)?,
            PassKind::LocalStats => {
                let n = self.fr(f).info.local_attrs.len();
                for k in 0..n {
                    let v = self.elem_number(f, e, &self.fr(f).info.local_attrs[k]);
                    if !v.is_nan() {
                        let b = &mut self.fr_mut(f).scratch.bounds[k];
                        b.0 = b.0.min(v);
                        b.1 = b.1.max(v);
                    }
                }
            }
            PassKind::Accumulator(i) => {
                let decl = self.fr(f).info.accs[i];
                let st = self
                    .fr_mut(f)
                    .scratch
                    .acc
                    .take()
                    .expect("accumulator pass begun");
                let st = self.acc_step(f, decl, st, e, None, &[])?;
                self.fr_mut(f).scratch.acc = Some(st);
            }
            PassKind::OrderAccumulator(i) => {
                let decl = &self.fr(f).info.order.expect("order pass").accumulators[i];
                let st = self
                    .fr_mut(f)
                    .scratch
                    .acc
                    .take()
                    .expect("accumulator pass begun");
                let st = self.acc_step(f, decl, st, e, None, &[])?;
                self.fr_mut(f).scratch.acc = Some(st);
            }
            PassKind::SortInner(j) => {
                let frame = self.fr(f);
                let decl = &frame.info.sort.expect("sort pass").inner[j];
                let owner = frame.scratch.owner[pos];
                let count = frame.record_count(frame.base[owner]);
                let st = std::mem::replace(
                    &mut self.fr_mut(f).scratch.group_acc[owner],
                    AccState::Extreme(f64::NAN),
                );
                let earlier = self.fr(f).inner[owner].clone();
                let st = self.acc_step(f, decl, st, e, Some(count), &earlier)?;
                self.fr_mut(f).scratch.group_acc[owner] = st;
            }
            PassKind::SortKey => {
                let sort = self.fr(f).info.sort.expect("sort pass");
                let locals = match e {
                    Elem::Group(_) => self.fr(f).inner.get(pos).cloned().unwrap_or_default(),
                    Elem::Row(_) => self.row_inner(f, e)?,
                };
                let k = self.eval_at(f, Some(e), &locals, &sort.key, sort.pos)?;
                self.fr_mut(f).scratch.keys.push(k);
            }
            PassKind::Weights => {
                let (expr, p) = self.fr(f).info.squarify.expect("squarify pass");
                let w = self.eval_at(f, Some(e), &[], expr, p)?.as_number();
                let w = if w.is_nan() || w < 0.0 {
                    self.diag(p, "Squarify weight is negative or missing; using 0");
                    0.0
                } else {
                    w
                };
                self.fr_mut(f).scratch.weights.push(w);
            }
            PassKind::Output => self.output_step(f, pos, e)?,
            PassKind::OrderResult => {}
        }
        Ok(())
    }

    fn pass_end(&mut self, f: usize, kind: PassKind) -> Result<(), EngineError> {
        match kind {
            PassKind::Filter => {
                let frame = self.fr_mut(f);
                frame.rows = std::mem::take(&mut frame.scratch.kept);
                if frame.partition.is_none() {
                    frame.use_rows();
                }
            }
            PassKind::Partition => self.partition_end(f)?,
            PassKind::LocalStats => {
                let frame = self.fr(f);
                let stats: Vec<DomainStats> = frame
                    .info
                    .local_attrs
                    .iter()
                    .zip(&frame.scratch.bounds)
                    .map(|(a, &(lo, hi))| {
                        self.scoped(
                            f,
                            DomainStats::from_values(
                                a,
                                [lo, hi].into_iter().filter(|v| v.is_finite()),
                            ),
                        )
                    })
                    .collect();
                self.fr_mut(f).local_stats = stats;
            }
            PassKind::Accumulator(i) => {
                let decl = self.fr(f).info.accs[i];
                self.finish_acc(f, decl)?;
            }
            PassKind::OrderAccumulator(i) => {
                let decl = &self.fr(f).info.order.expect("order pass").accumulators[i];
                self.finish_acc(f, decl)?;
            }
            PassKind::SortInner(j) => {
                let frame = self.fr(f);
                let decl = &frame.info.sort.expect("sort pass").inner[j];
                let states = std::mem::take(&mut self.fr_mut(f).scratch.group_acc);
                let frame = self.fr(f);
                let mut values = Vec::with_capacity(states.len());
                for (pos, st) in states.into_iter().enumerate() {
                    let count = frame.record_count(frame.base[pos]);
                    values.push(self.acc_finish(f, decl, st, Some(count))?);
                }
                let frame = self.fr_mut(f);
                for (pos, v) in values.into_iter().enumerate() {
                    frame.inner[pos].push((decl.name.as_str(), v));
                }
            }
            PassKind::SortKey => {
                let sort = self.fr(f).info.sort.expect("sort pass");
                let frame = self.fr_mut(f);
                frame.order = sort_order(&frame.scratch.keys, sort.descending);
                frame.scratch.keys.clear();
                self.sort_passes += 1;
            }
            PassKind::Weights => {
                let frame = self.fr(f);
                let w = &frame.scratch.weights;
                let mut order: Vec<usize> = (0..w.len()).collect();
                order.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
                let sorted: Vec<f64> = order.iter().map(|&i| w[i]).collect();
                let vp = frame.viewport;
                let (dw, dh) = (
                    vp.width * self.opts.device.width,
                    vp.height * self.opts.device.height,
                );
                let tiles = squarify(&sorted, dw, dh)
                    .into_iter()
                    .map(|t| {
                        if dw > 0.0 && dh > 0.0 {
                            Rect::new(t.x / dw, t.y / dh, t.width / dw, t.height / dh)
                        } else {
                            Rect::new(0.0, 0.0, 0.0, 0.0)
                        }
                    })
                    .collect();
                let frame = self.fr_mut(f);
                frame.order = order;
                frame.tiles = tiles;
                frame.scratch.weights.clear();
                self.sort_passes += 1;
            }
            PassKind::OrderResult | PassKind::Output => {}
        }
        Ok(())
    }

    fn finish_acc(&mut self, f: usize, decl: &'p StateDecl) -> Result<(), EngineError> {
        let st = self
            .fr_mut(f)
            .scratch
            .acc
            .take()
            .expect("accumulator pass begun");
        let v = self.acc_finish(f, decl, st, None)?;
        self.fr_mut(f).accs.push((decl.name.as_str(), v));
        Ok(())
    }

    /// Inner sort accumulators evaluated over a single row.
    fn row_inner(&self, f: usize, e: Elem) -> Result<Vec<(&'p str, Value)>, EngineError> {
        let sort = self.fr(f).info.sort.expect("sort pass");
        let mut out: Vec<(&'p str, Value)> = Vec::new();
        for decl in &sort.inner {
            let st = self.acc_init(f, decl, Some(1))?;
            let st = if decl.needs_pass() {
                self.acc_step(f, decl, st, e, Some(1), &out)?
            } else {
                st
            };
            out.push((decl.name.as_str(), self.acc_finish(f, decl, st, Some(1))?));
        }
        Ok(out)
    }

    pub fn acc_init(
        &self,
        f: usize,
        decl: &'p StateDecl,
        count: Option<usize>,
    ) -> Result<AccState, EngineError> {
        Ok(match &decl.kind {
            StateKind::Const(e) => {
                let mut ctx = self.ctx(f, None, &[]);
                ctx.record_count = count;
                AccState::Value(eval(e, &ctx).map_err(|x| super::frame::eval_error(decl.pos, x))?)
            }
            StateKind::Fold { init, .. } => {
                let mut ctx = self.ctx(f, None, &[]);
                ctx.record_count = count;
                AccState::Value(
                    eval(init, &ctx).map_err(|x| super::frame::eval_error(decl.pos, x))?,
                )
            }
            StateKind::Predefined(Aggregate::Sum | Aggregate::Average, _) => AccState::Sum(0.0, 0),
            StateKind::Predefined(_, _) => AccState::Extreme(f64::NAN),
        })
    }

    pub fn acc_step(
        &self,
        f: usize,
        decl: &'p StateDecl,
        st: AccState,
        e: Elem,
        count: Option<usize>,
        earlier: &[(&'p str, Value)],
    ) -> Result<AccState, EngineError> {
        let err = |x| super::frame::eval_error(decl.pos, x);
        Ok(match (&decl.kind, st) {
            (StateKind::Fold { iter, .. }, AccState::Value(v)) => {
                let mut locals = earlier.to_vec();
                locals.push((decl.name.as_str(), v));
                let mut ctx = self.ctx(f, Some(e), &locals);
                ctx.record_count = count;
                AccState::Value(eval(iter, &ctx).map_err(err)?)
            }
            (StateKind::Predefined(agg, expr), st) => {
                let mut ctx = self.ctx(f, Some(e), earlier);
                ctx.record_count = count;
                let v = eval(expr, &ctx).map_err(err)?.as_number();
                match (agg, st) {
                    (Aggregate::Sum | Aggregate::Average, AccState::Sum(s, n)) => {
                        AccState::Sum(s + v, n + 1)
                    }
                    (Aggregate::Minimum, AccState::Extreme(m)) => {
                        AccState::Extreme(if v.is_nan() {
                            m
                        } else if m.is_nan() {
                            v
                        } else {
                            m.min(v)
                        })
                    }
                    (Aggregate::Maximum, AccState::Extreme(m)) => {
                        AccState::Extreme(if v.is_nan() {
                            m
                        } else if m.is_nan() {
                            v
                        } else {
                            m.max(v)
                        })
                    }
                    (_, st) => st,
                }
            }
            (_, st) => st,
        })
    }

    pub fn acc_finish(
        &self,
        f: usize,
        decl: &'p StateDecl,
        st: AccState,
        count: Option<usize>,
    ) -> Result<Value, EngineError> {
        Ok(match (&decl.kind, st) {
            (StateKind::Fold { end: Some(end), .. }, AccState::Value(v)) => {
                let locals = [(decl.name.as_str(), v)];
                let mut ctx = self.ctx(f, None, &locals);
                ctx.record_count = count;
                eval(end, &ctx).map_err(|x| super::frame::eval_error(decl.pos, x))?
            }
            (StateKind::Predefined(Aggregate::Average, _), AccState::Sum(s, n)) => {
                Value::number(if n == 0 { f64::NAN } else { s / n as f64 })
            }
            (_, AccState::Value(v)) => v,
            (_, AccState::Sum(s, _)) => Value::number(s),
            (_, AccState::Extreme(m)) => Value::number(m),
        })
    }

    fn partition_step(&mut self, f: usize, e: Elem) -> Result<(), EngineError> {
        let Elem::Row(r) = e else {
            unreachable!("partitioning reads rows")
        };
        let p = self.fr(f).partition.expect("keyed scope");
        let key = self.eval_at(f, Some(e), &[], &p.key, p.pos)?;
        let repr = key_repr(&key);
        let table = self.table;
        let frame = self.fr_mut(f);
        match frame.scratch.group_of.get(&repr) {
            Some(&g) => {
                let group = &mut frame.groups[g];
                group.rows.push(r);
                for (c, slot) in group.agg.iter_mut().enumerate() {
                    match table.column(c) {
                        Column::Numeric(v) => *slot = Value::number(slot.as_number() + v[r]),
                        Column::Text(_) => {
                            if *slot != table.value(r, c) {
                                *slot = Value::Null;
                            }
                        }
                    }
                }
            }
            None => {
                frame.scratch.group_of.insert(repr, frame.groups.len());
                frame.groups.push(Group {
                    key,
                    rows: vec![r],
                    agg: table.row(r),
                });
            }
        }
        Ok(())
    }

    fn partition_end(&mut self, f: usize) -> Result<(), EngineError> {
        let frame = self.fr(f);
        let p = frame.partition.expect("keyed scope");
        let depth_keyed = p.key.free_refs().identifiers.contains("depth");
        let at_limit = frame.depth >= p.max_depth();
        let mode = if frame.groups.iter().all(|g| g.key.is_null()) {
            ScopeMode::Leaf
        } else if frame.groups.len() == 1 {
            if !depth_keyed {
                ScopeMode::Rows
            } else if at_limit {
                return Err(EngineError::MaxDepth {
                    line: p.pos.line,
                    col: p.pos.col,
                    depth: frame.depth,
                });
            } else {
                ScopeMode::Groups
            }
        } else if at_limit {
            self.diag(
                p.pos,
                format!("partition stopped at MaxDepth {}", p.max_depth()),
            );
            ScopeMode::Leaf
        } else {
            ScopeMode::Groups
        };
        let frame = self.fr_mut(f);
        frame.scratch.group_of.clear();
        match mode {
            ScopeMode::Rows => {
                frame.groups.clear();
                frame.use_rows();
            }
            ScopeMode::Groups => {
                frame.mode = ScopeMode::Groups;
                frame.base = (0..frame.groups.len()).map(Elem::Group).collect();
                frame.order = (0..frame.base.len()).collect();
            }
            _ => frame.mode = mode,
        }
        Ok(())
    }

    pub fn make_layer(&self, f: usize, j: usize) -> Frame<'p> {
        let parent = self.fr(f);
        let p = parent.info.layers[j];
        Frame::new(
            Some(f),
            NodeOrigin::Layer(j),
            &p.body,
            Some(p),
            parent.depth,
            parent.path.clone(),
            parent.viewport,
            parent.rows.clone(),
        )
    }

    /// Scope for the group at iteration position `pos`, or None when the
    /// group's primitive was skipped.
    pub fn make_child(&self, f: usize, pos: usize) -> Option<Frame<'p>> {
        let parent = self.fr(f);
        let viewport = parent.rects.get(pos).copied().flatten()?;
        let Elem::Group(g) = parent.base[parent.order[pos]] else {
            return None;
        };
        let group = &parent.groups[g];
        let mut path = parent.path.clone();
        path.push(group.key.clone());
        let (body, partition) = match find_case(parent.body, &path) {
            Some(case) => (case.body.as_slice(), None),
            None => (parent.body, parent.partition),
        };
        Some(Frame::new(
            Some(f),
            NodeOrigin::Group(pos),
            body,
            partition,
            parent.depth + 1,
            path,
            viewport,
            group.rows.clone(),
        ))
    }
}

/// Hashable identity of a partition key; distinct values map to distinct strings.
fn key_repr(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_nan() => "n:NaN".to_string(),
        Value::Number(n) => format!("n:{}", format_number(*n)),
        Value::Text(s) => format!("t:{s}"),
        Value::Bool(b) => format!("b:{b}"),
        Value::Null => "z".to_string(),
        Value::List(items) => {
            let inner: Vec<String> = items.iter().map(key_repr).collect();
            format!("l:[{}]", inner.join("\u{1f}"))
        }
    }
}

fn segment_matches(s: &Segment, v: &Value) -> bool {
    let shown = match v {
        Value::Number(n) => format_number(*n),
        other => other.to_string(),
    };
    match s {
        Segment::Any => true,
        Segment::Text(t) => *t == shown,
        Segment::Number(n) => format_number(*n) == shown,
    }
}

fn collect_cases<'p>(body: &'p [Node], out: &mut Vec<&'p ChildCase>) {
    for n in body {
        match n {
            Node::Children(cases) => out.extend(cases.iter()),
            Node::Primitive(p) => collect_cases(&p.children, out),
            _ => {}
        }
    }
}

/// The `Children` case matching the end of `path`: most literal segments
/// wins, then the first declared.
fn find_case<'p>(body: &'p [Node], path: &[Value]) -> Option<&'p ChildCase> {
    let mut cases = Vec::new();
    collect_cases(body, &mut cases);
    let mut best: Option<(&ChildCase, usize)> = None;
    for c in cases {
        let n = c.pattern.len();
        if n > path.len() {
            continue;
        }
        let tail = &path[path.len() - n..];
        if !c
            .pattern
            .iter()
            .zip(tail)
            .all(|(s, v)| segment_matches(s, v))
        {
            continue;
        }
        let literal = c
            .pattern
            .iter()
            .filter(|s| !matches!(s, Segment::Any))
            .count();
        if best.is_none_or(|(_, b)| literal > b) {
            best = Some((c, literal));
        }
    }
    best.map(|(c, _)| c)
}
