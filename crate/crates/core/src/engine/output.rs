use crate::expr::{eval, Pos};
use crate::program::{
    named_color, Anchor, Node, Paint, ParamSpec, PrimKind, Primitive, Repeat, StateKind, TILE_NAMES,
};
use crate::scene::{
    device_point, hsv_to_rgb, resolve_device, Instruction, Rect, DEFAULT_COLOR, DEFAULT_FONT_SIZE,
};
use crate::table::{format_number, Value};

use super::frame::{is_area, Elem, Machine};
use super::plan::ScopeMode;
use super::EngineError;

/// Upper bound on `RepeatGeometry` iterations per element.
const MAX_REPEAT: f64 = 1e6;

/// Default `Paint { }` components: zero hue and saturation at half value is
/// the default mid-gray.
const DEFAULT_HSV: (f64, f64, f64) = (0.0, 0.0, 0.5);

enum Drawn {
    Skipped,
    Area(Rect),
    Other,
}

/// Evaluated geometry of one primitive, before any instruction is pushed.
struct Shape {
    instruction: Instruction,
    color: (f64, f64, f64),
    font: Option<f64>,
    rect: Option<Rect>,
}

impl<'p, 't> Machine<'p, 't> {
    pub(super) fn output_begin(&mut self, f: usize) -> Result<(), EngineError> {
        let decls = self.fr(f).info.vars.clone();
        let mut vars: Vec<(&'p str, Value)> = Vec::with_capacity(decls.len());
        for d in decls {
            let init = match &d.kind {
                StateKind::Fold { init, .. } => init,
                StateKind::Const(e) | StateKind::Predefined(_, e) => e,
            };
            vars.push((d.name.as_str(), self.eval_at(f, None, &[], init, d.pos)?));
        }
        let frame = self.fr_mut(f);
        frame.vars = vars;
        frame.rects.clear();
        Ok(())
    }

    pub(super) fn output_step(&mut self, f: usize, pos: usize, e: Elem) -> Result<(), EngineError> {
        let frame = self.fr(f);
        let mut locals = frame.vars.clone();
        locals.push(("index", Value::Number(pos as f64)));
        if let Some(t) = frame.tiles.get(pos) {
            for (name, v) in TILE_NAMES.iter().zip([t.x, t.y, t.width, t.height]) {
                locals.push((name, Value::Number(v)));
            }
        }
        let vp = frame.viewport;
        let drawables = frame.info.drawables.clone();
        let mut rect: Option<Option<Rect>> = None;
        for n in drawables {
            let drawn = self.draw(f, e, &locals, n, vp)?;
            if rect.is_none() && is_area(n) {
                rect = Some(match drawn {
                    Drawn::Area(r) => Some(r),
                    _ => None,
                });
            }
        }
        if self.fr(f).mode == ScopeMode::Groups {
            self.fr_mut(f).rects.push(rect.unwrap_or(Some(vp)));
        }
        // Variables step after the element's output, in declaration order.
        let decls = self.fr(f).info.vars.clone();
        for (j, d) in decls.iter().enumerate() {
            if let StateKind::Fold { iter, .. } = &d.kind {
                let v = self.eval_at(f, Some(e), &locals, iter, d.pos)?;
                locals[j].1 = v;
            }
        }
        let n = decls.len();
        locals.truncate(n);
        self.fr_mut(f).vars = locals;
        Ok(())
    }

    fn draw(
        &mut self,
        f: usize,
        e: Elem,
        locals: &[(&'p str, Value)],
        n: &'p Node,
        vp: Rect,
    ) -> Result<Drawn, EngineError> {
        match n {
            Node::Primitive(p) => self.draw_primitive(f, e, locals, p, vp),
            Node::Repeat(r) => {
                self.draw_repeat(f, e, locals, r, vp)?;
                Ok(Drawn::Other)
            }
            _ => Ok(Drawn::Other),
        }
    }

    fn draw_repeat(
        &mut self,
        f: usize,
        e: Elem,
        locals: &[(&'p str, Value)],
        r: &'p Repeat,
        vp: Rect,
    ) -> Result<(), EngineError> {
        let count = match eval(&r.count, &self.ctx(f, Some(e), locals)) {
            Ok(v) => v.as_number(),
            Err(err) => {
                self.diag(r.pos, format!("RepeatGeometry skipped: {err}"));
                return Ok(());
            }
        };
        if count.is_nan() {
            self.diag(r.pos, "RepeatGeometry count is NaN; skipped");
            return Ok(());
        }
        if count > MAX_REPEAT {
            self.diag(
                r.pos,
                format!("RepeatGeometry count capped at {MAX_REPEAT}"),
            );
        }
        let count = count.clamp(0.0, MAX_REPEAT).floor() as usize;
        let mut inner = locals.to_vec();
        inner.push((r.index.as_str(), Value::Null));
        let slot = inner.len() - 1;
        for k in 0..count {
            inner[slot].1 = Value::Number(k as f64);
            for n in &r.body {
                self.draw(f, e, &inner, n, vp)?;
            }
        }
        Ok(())
    }

    fn draw_primitive(
        &mut self,
        f: usize,
        e: Elem,
        locals: &[(&'p str, Value)],
        p: &'p Primitive,
        vp: Rect,
    ) -> Result<Drawn, EngineError> {
        let shape = match self.shape(f, e, locals, p, vp) {
            Ok(s) => s,
            Err((pos, msg)) => {
                self.diag(pos, format!("{} skipped: {msg}", p.kind.keyword()));
                return Ok(Drawn::Skipped);
            }
        };
        if self.color != shape.color {
            self.color = shape.color;
            let (r, g, b) = shape.color;
            self.push(Instruction::SetColor { r, g, b });
        }
        if let Some(size) = shape.font {
            if self.font != size {
                self.font = size;
                self.push(Instruction::SetFont { size });
            }
        }
        self.push(shape.instruction);
        let inner_vp = shape.rect.unwrap_or(vp);
        for c in &p.children {
            self.draw(f, e, locals, c, inner_vp)?;
        }
        Ok(match shape.rect {
            Some(r) => Drawn::Area(r),
            None => Drawn::Other,
        })
    }

    fn push(&mut self, i: Instruction) {
        if self.emit {
            self.rep.instructions.push(i);
        }
    }

    /// Evaluates every parameter of `p`. Errors carry the offending position.
    fn shape(
        &mut self,
        f: usize,
        e: Elem,
        locals: &[(&'p str, Value)],
        p: &'p Primitive,
        vp: Rect,
    ) -> Result<Shape, (Pos, String)> {
        let dev = self.opts.device;
        let num = |m: &Self, name: &str| -> Result<f64, (Pos, String)> {
            let spec = p.param(name).expect("validated parameter");
            m.number(f, e, locals, spec)
        };
        let color = self.paint(f, e, locals, p)?;
        let (instruction, rect, font) = match p.kind {
            PrimKind::FillRectangle | PrimKind::FillEllipse => {
                let (mut x, mut y) = (num(self, "X")?, num(self, "Y")?);
                let (mut w, mut h) = (num(self, "Width")?, num(self, "Height")?);
                if w < 0.0 || h < 0.0 {
                    self.diag(p.pos, "negative size clamped to 0");
                    w = w.max(0.0);
                    h = h.max(0.0);
                }
                if p.param("X").is_some_and(|s| s.anchor == Anchor::Center) {
                    x -= w / 2.0;
                }
                if p.param("Y").is_some_and(|s| s.anchor == Anchor::Center) {
                    y -= h / 2.0;
                }
                let local = Rect::new(x, y, w, h);
                let (dx, dy, dw, dh) = resolve_device(&local, &vp, dev);
                let ins = if p.kind == PrimKind::FillRectangle {
                    Instruction::FillRectangle {
                        x: dx,
                        y: dy,
                        w: dw,
                        h: dh,
                    }
                } else {
                    Instruction::FillEllipse {
                        x: dx,
                        y: dy,
                        w: dw,
                        h: dh,
                    }
                };
                (ins, Some(vp.compose(&local)), None)
            }
            PrimKind::Line => {
                let a = vp.point(num(self, "X1")?, num(self, "Y1")?);
                let b = vp.point(num(self, "X2")?, num(self, "Y2")?);
                let (x1, y1) = device_point(a.0, a.1, dev);
                let (x2, y2) = device_point(b.0, b.1, dev);
                (Instruction::Line { x1, y1, x2, y2 }, None, None)
            }
            PrimKind::Polyline => {
                let mut points = Vec::with_capacity(p.points.len());
                for pt in &p.points {
                    let (x, y) = (
                        self.number(f, e, locals, &pt.x)?,
                        self.number(f, e, locals, &pt.y)?,
                    );
                    let a = vp.point(x, y);
                    points.push(device_point(a.0, a.1, dev));
                }
                (Instruction::Polyline { points }, None, None)
            }
            PrimKind::DrawString => {
                let spec = p.param("Text").expect("validated parameter");
                let text = match eval(&spec.expr, &self.ctx(f, Some(e), locals)) {
                    Ok(v) => display(&v),
                    Err(err) => return Err((spec.pos, err.to_string())),
                };
                let a = vp.point(num(self, "X")?, num(self, "Y")?);
                let (x, y) = device_point(a.0, a.1, dev);
                let size = match &p.font_size {
                    Some(s) => self.number(f, e, locals, s)?.max(0.0),
                    None => DEFAULT_FONT_SIZE,
                };
                (Instruction::DrawString { text, x, y }, None, Some(size))
            }
        };
        Ok(Shape {
            instruction,
            color,
            font,
            rect,
        })
    }

    fn number(
        &self,
        f: usize,
        e: Elem,
        locals: &[(&'p str, Value)],
        spec: &ParamSpec,
    ) -> Result<f64, (Pos, String)> {
        match eval(&spec.expr, &self.ctx(f, Some(e), locals)) {
            Ok(v) => {
                let x = v.as_number();
                if x.is_nan() {
                    Err((spec.pos, format!("`{}` is NaN", spec.expr)))
                } else {
                    Ok(x)
                }
            }
            Err(err) => Err((spec.pos, err.to_string())),
        }
    }

    fn paint(
        &mut self,
        f: usize,
        e: Elem,
        locals: &[(&'p str, Value)],
        p: &'p Primitive,
    ) -> Result<(f64, f64, f64), (Pos, String)> {
        match &p.paint {
            None => Ok(DEFAULT_COLOR),
            Some(Paint::Named(name, pos)) => {
                named_color(name).ok_or_else(|| (*pos, format!("unknown color `{name}`")))
            }
            Some(Paint::Hsv {
                hue,
                saturation,
                value,
            }) => {
                let mut c = [DEFAULT_HSV.0, DEFAULT_HSV.1, DEFAULT_HSV.2];
                for (slot, spec) in c.iter_mut().zip([hue, saturation, value]) {
                    if let Some(spec) = spec {
                        let v = self.number(f, e, locals, spec)?;
                        if !(0.0..=1.0).contains(&v) {
                            self.diag(
                                spec.pos,
                                format!("paint component {} clamped to [0, 1]", format_number(v)),
                            );
                        }
                        *slot = v.clamp(0.0, 1.0);
                    }
                }
                Ok(hsv_to_rgb(c[0], c[1], c[2]))
            }
        }
    }
}

fn display(v: &Value) -> String {
    match v {
        Value::Number(n) => format_number(*n),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}
