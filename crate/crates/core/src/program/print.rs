//! Canonical pretty-printer. Parsing its output yields the same tree.

use std::fmt::{self, Write};

use super::*;
use crate::expr::lexer::is_identifier;
use crate::table::format_number;

impl fmt::Display for VizProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        out.push_str("Visualization {\n");
        nodes(&mut out, &self.root, 1);
        out.push_str("}\n");
        f.write_str(&out)
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn line(out: &mut String, level: usize, text: &str) {
    indent(out, level);
    out.push_str(text);
    out.push('\n');
}

fn nodes(out: &mut String, list: &[Node], level: usize) {
    for n in list {
        node(out, n, level);
    }
}

fn node(out: &mut String, n: &Node, level: usize) {
    match n {
        Node::Partition(p) => {
            line(out, level, &format!("Partition = {} {{", p.key));
            if let Some(d) = p.max_depth {
                line(out, level + 1, &format!("MaxDepth = {d};"));
            }
            nodes(out, &p.body, level + 1);
            line(out, level, "}");
        }
        Node::Sort(s) => {
            if !s.descending && s.inner.is_empty() {
                line(out, level, &format!("Sort = {};", s.key));
            } else {
                line(out, level, "Sort {");
                line(out, level + 1, &format!("Key = {};", s.key));
                if s.descending {
                    line(out, level + 1, "Descending = 1;");
                }
                if !s.inner.is_empty() {
                    decls(out, "Accumulator", &s.inner, level + 1);
                }
                line(out, level, "}");
            }
        }
        Node::Order(o) => {
            line(out, level, "Order {");
            if !o.accumulators.is_empty() {
                decls(out, "Accumulator", &o.accumulators, level + 1);
            }
            line(out, level + 1, &format!("Result = {};", o.result));
            line(out, level, "}");
        }
        Node::Filter(e, _) => line(out, level, &format!("Filter = {e};")),
        Node::Variables(d) => decls(out, "Variable", d, level),
        Node::Accumulators(d) => decls(out, "Accumulator", d, level),
        Node::Primitive(p) => primitive(out, p, level),
        Node::Children(cases) => {
            line(out, level, "Children {");
            for c in cases {
                let pat: Vec<String> = c.pattern.iter().map(segment).collect();
                line(out, level + 1, &format!("{} {{", pat.join("/")));
                nodes(out, &c.body, level + 2);
                line(out, level + 1, "}");
            }
            line(out, level, "}");
        }
        Node::Repeat(r) => {
            line(out, level, "RepeatGeometry {");
            line(out, level + 1, &format!("Count = {};", r.count));
            line(out, level + 1, &format!("Index = {};", r.index));
            nodes(out, &r.body, level + 1);
            line(out, level, "}");
        }
        Node::Margin(m, _) => line(out, level, &format!("Margin = {};", format_number(*m))),
        Node::Squarify(w, _) => {
            line(out, level, "Squarify {");
            line(out, level + 1, &format!("Weight = {w};"));
            line(out, level, "}");
        }
    }
}

fn decls(out: &mut String, keyword: &str, list: &[StateDecl], level: usize) {
    line(out, level, &format!("{keyword} {{"));
    for d in list {
        match &d.kind {
            StateKind::Const(e) => line(out, level + 1, &format!("{} = {};", d.name, e)),
            StateKind::Predefined(a, e) => line(
                out,
                level + 1,
                &format!("{} = {}({});", d.name, a.name(), e),
            ),
            StateKind::Fold { init, iter, end } => {
                line(out, level + 1, &format!("{} = {{", d.name));
                line(out, level + 2, &format!("init = {init};"));
                line(out, level + 2, &format!("iter = {iter};"));
                if let Some(end) = end {
                    line(out, level + 2, &format!("end = {end};"));
                }
                line(out, level + 1, "}");
            }
        }
    }
    line(out, level, "}");
}

fn param(p: &ParamSpec) -> String {
    let mut s = p.expr.to_string();
    let mut mods = Vec::new();
    match p.mapping {
        MappingSpec::Auto => {}
        MappingSpec::Linear => mods.push("linear"),
        MappingSpec::Log => mods.push("log"),
        MappingSpec::Raw => mods.push("raw"),
    }
    if p.scope == DomainScope::Local {
        mods.push("local");
    }
    if p.anchor == Anchor::Center {
        mods.push("center");
    }
    if !mods.is_empty() {
        let _ = write!(s, " with {}", mods.join(", "));
    }
    s
}

fn primitive(out: &mut String, p: &Primitive, level: usize) {
    line(out, level, &format!("{} {{", p.kind.keyword()));
    for (name, spec) in &p.params {
        line(out, level + 1, &format!("{name} = {};", param(spec)));
    }
    for pt in &p.points {
        line(
            out,
            level + 1,
            &format!("Point {{ X = {}; Y = {}; }}", param(&pt.x), param(&pt.y)),
        );
    }
    match &p.paint {
        None => {}
        Some(Paint::Named(name, _)) => line(out, level + 1, &format!("Paint = {name};")),
        Some(Paint::Hsv {
            hue,
            saturation,
            value,
        }) => {
            line(out, level + 1, "Paint {");
            for (name, v) in [("hue", hue), ("saturation", saturation), ("value", value)] {
                if let Some(v) = v {
                    line(out, level + 2, &format!("{name} = {};", param(v)));
                }
            }
            line(out, level + 1, "}");
        }
    }
    if let Some(size) = &p.font_size {
        line(
            out,
            level + 1,
            &format!("Font {{ Size = {}; }}", param(size)),
        );
    }
    nodes(out, &p.children, level + 1);
    line(out, level, "}");
}

/// Path segment syntax for a literal key.
pub(super) fn print_segment(text: &str) -> String {
    segment(&Segment::Text(text.to_string()))
}

fn segment(s: &Segment) -> String {
    match s {
        Segment::Any => "*".to_string(),
        Segment::Text(t) if is_identifier(t) => t.clone(),
        Segment::Text(t) => Expr::Text(t.clone()).to_string(),
        Segment::Number(v) => format_number(*v),
    }
}
