//! Static checks against a schema, and resolution of implicit mappings.
//!
//! Visibility rules mirror the engine:
//! - partition keys and filters see enclosing accumulators, `depth` and `Length`;
//! - accumulators additionally see `childCount`, `recordCount` and earlier
//!   accumulators of their own scope (iter also sees itself and the row);
//! - variables, tile names and `index` are visible only where elements are drawn.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::*;
use crate::expr::{Mapping, Pos};
use crate::table::{AttrType, DataTable, Schema};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    fn new(pos: Pos, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

/// Checks names, types, scoping and structure. An empty list means the
/// program can run on any table with this schema.
pub fn validate(program: &VizProgram, schema: &Schema) -> Vec<Diagnostic> {
    let mut v = Validator {
        schema,
        table: None,
        out: Vec::new(),
    };
    v.body(&program.root, &Names::default(), None);
    v.out
}

/// [`validate`] plus checks that need the data: logarithmic mappings require
/// a strictly positive domain.
pub fn validate_with_table(program: &VizProgram, table: &DataTable) -> Vec<Diagnostic> {
    let mut v = Validator {
        schema: table.schema(),
        table: Some(table),
        out: Vec::new(),
    };
    v.body(&program.root, &Names::default(), None);
    v.out
}

#[derive(Clone, Default)]
struct Names {
    idents: BTreeSet<String>,
    row: bool,
}

impl Names {
    fn with(&self, names: impl IntoIterator<Item = impl Into<String>>) -> Names {
        let mut n = self.clone();
        n.idents.extend(names.into_iter().map(Into::into));
        n
    }

    fn with_row(&self) -> Names {
        let mut n = self.clone();
        n.row = true;
        n
    }
}

struct Validator<'a> {
    schema: &'a Schema,
    table: Option<&'a DataTable>,
    out: Vec<Diagnostic>,
}

fn decl_names(list: &[StateDecl]) -> impl Iterator<Item = String> + '_ {
    list.iter().map(|d| d.name.clone())
}

impl Validator<'_> {
    fn err(&mut self, pos: Pos, msg: impl Into<String>) {
        self.out.push(Diagnostic::new(pos, msg));
    }

    fn expr(&mut self, e: &Expr, names: &Names, pos: Pos) {
        let refs = e.free_refs();
        for a in &refs.attributes {
            if self.schema.index_of(a).is_none() {
                self.err(pos, format!("unknown attribute `{a}`"));
            } else if !names.row {
                self.err(
                    pos,
                    format!("attribute `${a}` cannot be used here: no row or group is current"),
                );
            }
        }
        for i in &refs.identifiers {
            if !names.idents.contains(i) {
                self.err(pos, format!("unresolved identifier `{i}`"));
            }
        }
        let mut norms = Vec::new();
        e.walk(&mut |n| {
            if let Expr::Norm { attr, mapping, .. } = n {
                norms.push((attr.clone(), *mapping));
            }
        });
        for (attr, mapping) in norms {
            self.mapped_attr(&attr, mapping, pos);
        }
    }

    fn mapped_attr(&mut self, attr: &str, mapping: Mapping, pos: Pos) {
        match self.schema.type_of(attr) {
            Some(AttrType::Text) if mapping != Mapping::Raw => self.err(
                pos,
                format!("attribute `{attr}` is text and cannot be normalized"),
            ),
            Some(AttrType::Numeric) if mapping == Mapping::Log => {
                if let Some(t) = self.table {
                    if let Ok(s) = t.global_stats(attr) {
                        if s.min <= 0.0 {
                            self.err(
                                pos,
                                format!(
                                    "log mapping of `{attr}` needs a positive domain, but its minimum is {}",
                                    crate::table::format_number(s.min)
                                ),
                            );
                        }
                    }
                }
            }
            _ => {}
        }
    }

    fn decls(&mut self, list: &[StateDecl], base: &Names, rows: bool) {
        let mut visible = base.clone();
        for d in list {
            match &d.kind {
                StateKind::Const(e) => self.expr(e, &visible, d.pos),
                StateKind::Predefined(_, e) => {
                    let n = if rows {
                        visible.with_row()
                    } else {
                        visible.clone()
                    };
                    self.expr(e, &n, d.pos)
                }
                StateKind::Fold { init, iter, end } => {
                    self.expr(init, &visible, d.pos);
                    let own = visible.with([d.name.clone()]);
                    let it = if rows { own.with_row() } else { own.clone() };
                    self.expr(iter, &it, d.pos);
                    if let Some(end) = end {
                        self.expr(end, &own, d.pos);
                    }
                }
            }
            visible = visible.with([d.name.clone()]);
        }
    }

    /// `ancestors` holds accumulator names of enclosing scopes; `partition`
    /// is the partition whose body this is, if any.
    fn body(&mut self, body: &[Node], ancestors: &Names, partition: Option<&Partition>) {
        let mut accs: Vec<&StateDecl> = Vec::new();
        let mut vars: Vec<&StateDecl> = Vec::new();
        let mut orderings = Vec::new();
        let mut squarify = None;
        for n in body {
            match n {
                Node::Accumulators(d) => accs.extend(d),
                Node::Variables(d) => vars.extend(d),
                Node::Sort(s) => orderings.push(s.pos),
                Node::Order(o) => orderings.push(o.pos),
                Node::Squarify(_, p) => {
                    if squarify.is_some() {
                        self.err(*p, "only one `Squarify` is allowed per scope");
                    }
                    squarify = Some(*p);
                }
                _ => {}
            }
        }
        if orderings.len() > 1 {
            self.err(
                orderings[1],
                "only one `Sort` or `Order` is allowed per scope",
            );
        }
        if let (Some(p), Some(_)) = (squarify, orderings.first()) {
            self.err(
                p,
                "`Squarify` fixes the element order and cannot be combined with `Sort` or `Order`",
            );
        }

        let mut declared: Vec<&str> = Vec::new();
        for d in accs.iter().chain(vars.iter()) {
            if declared.contains(&d.name.as_str()) {
                self.err(
                    d.pos,
                    format!("`{}` is declared twice in one scope", d.name),
                );
            } else if BUILTINS.contains(&d.name.as_str()) || TILE_NAMES.contains(&d.name.as_str()) {
                self.err(d.pos, format!("`{}` shadows a builtin name", d.name));
            } else if ancestors.idents.contains(&d.name) && !BUILTINS.contains(&d.name.as_str()) {
                self.err(
                    d.pos,
                    format!("`{}` shadows a declaration of an enclosing scope", d.name),
                );
            }
            declared.push(&d.name);
        }
        for d in &vars {
            if let StateKind::Predefined(..) = d.kind {
                self.err(
                    d.pos,
                    format!("variable `{}` cannot use a predefined accumulator", d.name),
                );
            }
        }

        let key_names = ancestors.with(["depth", "Length"]);
        let acc_base = key_names.with(["childCount", "recordCount"]);
        let own_accs: Vec<String> = accs.iter().map(|d| d.name.clone()).collect();
        let with_accs = acc_base.with(own_accs.iter().cloned());

        for n in body {
            if let Node::Filter(e, p) = n {
                self.expr(e, &key_names.with_row(), *p);
            }
        }
        let acc_list: Vec<StateDecl> = accs.iter().map(|d| (*d).clone()).collect();
        self.decls(&acc_list, &acc_base, true);

        let mut element = with_accs.with_row();
        for n in body {
            match n {
                Node::Sort(s) => {
                    self.decls(&s.inner, &with_accs, true);
                    let k = element.with(decl_names(&s.inner));
                    self.expr(&s.key, &k, s.pos);
                }
                Node::Order(o) => {
                    self.decls(&o.accumulators, &with_accs, true);
                    let r = with_accs.with(decl_names(&o.accumulators));
                    self.expr(&o.result, &r, o.pos);
                }
                Node::Squarify(w, p) => self.expr(w, &element, *p),
                _ => {}
            }
        }

        let var_list: Vec<StateDecl> = vars.iter().map(|d| (*d).clone()).collect();
        for d in &var_list {
            match &d.kind {
                StateKind::Fold { init, .. } => self.expr(init, &with_accs, d.pos),
                StateKind::Const(e) => self.expr(e, &with_accs, d.pos),
                StateKind::Predefined(..) => {}
            }
        }
        element = element.with(decl_names(&var_list)).with(["index"]);
        if squarify.is_some() {
            element = element.with(TILE_NAMES.iter().copied());
        }
        for d in &var_list {
            if let StateKind::Fold { iter, end, .. } = &d.kind {
                self.expr(iter, &element, d.pos);
                if let Some(end) = end {
                    self.expr(end, &element, d.pos);
                }
            }
        }

        let child_ancestors = ancestors.with(own_accs.iter().cloned());
        for n in body {
            match n {
                Node::Partition(p) => {
                    self.expr(
                        &p.key,
                        &ancestors
                            .with(own_accs.iter().cloned())
                            .with(["depth", "Length"])
                            .with_row(),
                        p.pos,
                    );
                    self.body(&p.body, &child_ancestors, Some(p));
                }
                Node::Margin(m, p) => {
                    if !(0.0..0.5).contains(m) {
                        self.err(*p, "`Margin` must lie in [0, 0.5)");
                    }
                }
                Node::Primitive(prim) => {
                    self.primitive(prim, &element, &child_ancestors, partition, true)
                }
                Node::Repeat(r) => self.repeat(r, &element, &child_ancestors, partition),
                Node::Children(cases) => {
                    self.children(cases, &child_ancestors, partition, n_pos(cases))
                }
                _ => {}
            }
        }
    }

    fn children(
        &mut self,
        cases: &[ChildCase],
        ancestors: &Names,
        partition: Option<&Partition>,
        pos: Pos,
    ) {
        let Some(part) = partition else {
            self.err(
                pos,
                "`Children` is only meaningful inside a `Partition` body",
            );
            return;
        };
        for c in cases {
            if c.pattern.len() > part.max_depth() + 1 {
                self.err(
                    c.pos,
                    format!(
                        "path pattern has {} segments but the partition is at most {} levels deep",
                        c.pattern.len(),
                        part.max_depth() + 1
                    ),
                );
            }
            self.body(&c.body, ancestors, None);
        }
    }

    fn repeat(
        &mut self,
        r: &Repeat,
        element: &Names,
        ancestors: &Names,
        partition: Option<&Partition>,
    ) {
        self.expr(&r.count, element, r.pos);
        let inner = element.with([r.index.clone()]);
        for n in &r.body {
            match n {
                Node::Primitive(p) => self.primitive(p, &inner, ancestors, partition, false),
                Node::Repeat(rr) => self.repeat(rr, &inner, ancestors, partition),
                _ => {}
            }
        }
    }

    fn primitive(
        &mut self,
        prim: &Primitive,
        names: &Names,
        ancestors: &Names,
        partition: Option<&Partition>,
        children_ok: bool,
    ) {
        for required in prim.kind.params() {
            if prim.param(required).is_none() {
                self.err(
                    prim.pos,
                    format!(
                        "`{}` is missing parameter `{required}`",
                        prim.kind.keyword()
                    ),
                );
            }
        }
        if prim.kind == PrimKind::Polyline && prim.points.len() < 2 {
            self.err(prim.pos, "`Polyline` needs at least two `Point` blocks");
        }
        for (name, spec) in &prim.params {
            self.param(spec, names, name != "Text");
            if spec.anchor == Anchor::Center
                && !(prim.kind.is_area() && (name == "X" || name == "Y"))
            {
                self.err(
                    spec.pos,
                    format!("`center` only applies to `X` and `Y` of filled shapes, not `{name}`"),
                );
            }
        }
        for pt in &prim.points {
            self.param(&pt.x, names, true);
            self.param(&pt.y, names, true);
        }
        if let Some(Paint::Hsv {
            hue,
            saturation,
            value,
        }) = &prim.paint
        {
            for spec in [hue, saturation, value].into_iter().flatten() {
                self.param(spec, names, true);
            }
        }
        if let Some(size) = &prim.font_size {
            self.param(size, names, false);
        }
        for n in &prim.children {
            match n {
                Node::Primitive(p) => self.primitive(p, names, ancestors, partition, children_ok),
                Node::Repeat(r) => self.repeat(r, names, ancestors, partition),
                Node::Children(cases) if children_ok => {
                    self.children(cases, ancestors, partition, n_pos(cases))
                }
                Node::Children(cases) => self.err(
                    n_pos(cases),
                    "`Children` cannot appear inside `RepeatGeometry`",
                ),
                _ => {}
            }
        }
    }

    /// `mapped` marks geometric and paint parameters, where a bare numeric
    /// attribute is normalized implicitly.
    fn param(&mut self, spec: &ParamSpec, names: &Names, mapped: bool) {
        self.expr(&spec.expr, names, spec.pos);
        let bare = match &spec.expr {
            Expr::Attr(a) => Some(a.as_str()),
            _ => None,
        };
        let explicit = match spec.mapping {
            MappingSpec::Linear => Some(Mapping::Linear),
            MappingSpec::Log => Some(Mapping::Log),
            _ => None,
        };
        match (bare, explicit) {
            (None, Some(_)) => self.err(
                spec.pos,
                "an explicit `linear` or `log` mapping needs a bare attribute reference; use norm() inside expressions",
            ),
            (Some(a), Some(m)) => self.mapped_attr(a, m, spec.pos),
            (Some(a), None) => {
                if mapped
                    && spec.mapping == MappingSpec::Auto
                    && self.schema.type_of(a) == Some(AttrType::Text)
                {
                    self.err(
                        spec.pos,
                        format!("attribute `{a}` is text and cannot drive a geometric or paint parameter"),
                    );
                }
            }
            (None, None) => {}
        }
        if spec.scope == DomainScope::Local && (bare.is_none() || spec.mapping == MappingSpec::Raw)
        {
            self.err(
                spec.pos,
                "`local` needs a bare attribute with a linear or log mapping",
            );
        }
    }
}

fn n_pos(cases: &[ChildCase]) -> Pos {
    cases.first().map(|c| c.pos).unwrap_or_default()
}

/// Rewrites every geometric and paint parameter into an explicit form: a
/// bare numeric attribute (implicit or with an explicit mapping) becomes a
/// `norm()` call, everything else is raw.
pub fn resolve_mappings(program: &mut VizProgram, schema: &Schema) {
    fn spec(s: &mut ParamSpec, schema: &Schema, mapped: bool) {
        if let Expr::Attr(a) = &s.expr {
            let numeric = schema.type_of(a) == Some(AttrType::Numeric);
            let mapping = match s.mapping {
                MappingSpec::Auto if mapped && numeric => Some(Mapping::Linear),
                MappingSpec::Linear if numeric => Some(Mapping::Linear),
                MappingSpec::Log if numeric => Some(Mapping::Log),
                _ => None,
            };
            if let Some(mapping) = mapping {
                s.expr = Expr::Norm {
                    attr: a.clone(),
                    mapping,
                    scope: s.scope,
                };
            }
        }
        s.mapping = MappingSpec::Raw;
    }
    fn nodes(list: &mut [Node], schema: &Schema) {
        for n in list {
            match n {
                Node::Partition(p) => nodes(&mut p.body, schema),
                Node::Children(cases) => cases.iter_mut().for_each(|c| nodes(&mut c.body, schema)),
                Node::Repeat(r) => nodes(&mut r.body, schema),
                Node::Primitive(p) => {
                    for (name, s) in &mut p.params {
                        spec(s, schema, name != "Text");
                    }
                    for pt in &mut p.points {
                        spec(&mut pt.x, schema, true);
                        spec(&mut pt.y, schema, true);
                    }
                    if let Some(Paint::Hsv {
                        hue,
                        saturation,
                        value,
                    }) = &mut p.paint
                    {
                        for s in [hue, saturation, value].into_iter().flatten() {
                            spec(s, schema, true);
                        }
                    }
                    if let Some(s) = &mut p.font_size {
                        spec(s, schema, false);
                    }
                    nodes(&mut p.children, schema);
                }
                _ => {}
            }
        }
    }
    nodes(&mut program.root, schema);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Attribute;

    fn cities() -> Schema {
        let num = |n: &str| Attribute {
            name: n.into(),
            ty: AttrType::Numeric,
        };
        Schema::new(vec![
            Attribute {
                name: "name".into(),
                ty: AttrType::Text,
            },
            Attribute {
                name: "State".into(),
                ty: AttrType::Text,
            },
            num("Population"),
            num("Crime"),
            num("HousingCost"),
            num("Climate"),
            num("Latitude"),
            num("Longitude"),
        ])
        .unwrap()
    }

    fn diags(src: &str) -> Vec<String> {
        validate(&parse_program(src).unwrap(), &cities())
            .into_iter()
            .map(|d| d.message)
            .collect()
    }

    #[test]
    fn plot_validates_cleanly() {
        let d = diags(
            "Visualization { FillEllipse { X = $Longitude; Y = $Latitude; Width = .04; Height = .04 } }",
        );
        assert!(d.is_empty(), "{d:?}");
    }

    #[test]
    fn unknown_attribute_is_named() {
        let d = diags("Visualization { FillEllipse { X = $Nope; Y = 0; Width = 1; Height = 1 } }");
        assert_eq!(d, vec!["unknown attribute `Nope`"]);
    }

    #[test]
    fn sibling_variable_is_out_of_scope() {
        // `i` lives in the first partition body; the second cannot see it.
        let d = diags(
            "Visualization {
               Partition = $State {
                 Variable { i = { init = 0; iter = i + 1 } }
                 FillRectangle { X = i; Y = 0; Width = .1; Height = .1 }
               }
               Partition = $State {
                 FillRectangle { X = i; Y = 0; Width = .1; Height = .1 }
               }
             }",
        );
        assert_eq!(d, vec!["unresolved identifier `i`"]);
    }

    #[test]
    fn variables_are_invisible_to_accumulators_and_keys() {
        let d = diags(
            "Visualization {
               Variable { i = { init = 0; iter = i + 1 } }
               Accumulator { S = { init = 0; iter = S + i } }
               Partition = i { }
             }",
        );
        assert_eq!(d.len(), 2, "{d:?}");
        assert!(d.iter().all(|m| m.contains("`i`")));
    }

    #[test]
    fn structural_problems() {
        let d = diags("Visualization { FillEllipse { X = 0 } }");
        assert_eq!(d.len(), 3);
        let d = diags("Visualization { Children { * { } } }");
        assert!(d[0].contains("only meaningful inside a `Partition`"));
        let d = diags("Visualization { Accumulator { depth = 1 } }");
        assert!(d[0].contains("shadows a builtin"));
        let d = diags(
            "Visualization { Accumulator { a = 1 } Variable { a = { init = 0; iter = 1 } } }",
        );
        assert!(d[0].contains("declared twice"));
        let d = diags("Visualization { Sort = $Crime; Order { Result = range(childCount) } }");
        assert!(d[0].contains("only one `Sort` or `Order`"));
        let d = diags("Visualization { FillEllipse { X = $name; Y = 0; Width = 1; Height = 1 } }");
        assert!(d[0].contains("is text"));
        let d = diags("Visualization { FillEllipse { X = $Crime + 1 with log; Y = 0; Width = 1; Height = 1 } }");
        assert!(d[0].contains("bare attribute"));
        let d = diags("Visualization { Accumulator { S = $Crime } }");
        assert!(d[0].contains("no row"));
        let d = diags("Visualization { Margin = 0.7 }");
        assert!(d[0].contains("Margin"));
    }

    #[test]
    fn log_mapping_needs_positive_domain() {
        let t = crate::table::load_csv(b"a,b\n0,1\n5,2\n", Default::default()).unwrap();
        let bad = parse_program(
            "Visualization { FillEllipse { X = $a with log; Y = 0; Width = 1; Height = 1 } }",
        )
        .unwrap();
        assert!(validate(&bad, t.schema()).is_empty());
        let d = validate_with_table(&bad, &t);
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("positive domain"));
        let ok = parse_program(
            "Visualization { FillEllipse { X = norm($b, log); Y = 0; Width = 1; Height = 1 } }",
        )
        .unwrap();
        assert!(validate_with_table(&ok, &t).is_empty());
    }

    #[test]
    fn resolution_follows_the_site_rule() {
        let mut p = parse_program(
            "Visualization { FillRectangle {
               X = $Crime; Y = $Crime / 2; Width = $Climate with log, local; Height = $Crime with raw
               Paint { value = $Population > 1M ? 1 : 0 }
             } }",
        )
        .unwrap();
        resolve_mappings(&mut p, &cities());
        let Node::Primitive(r) = &p.root[0] else {
            panic!()
        };
        assert_eq!(
            r.param("X").unwrap().expr,
            Expr::Norm {
                attr: "Crime".into(),
                mapping: Mapping::Linear,
                scope: DomainScope::Global
            }
        );
        assert_eq!(r.param("Y").unwrap().expr.to_string(), "$Crime / 2");
        assert_eq!(
            r.param("Width").unwrap().expr,
            Expr::Norm {
                attr: "Climate".into(),
                mapping: Mapping::Log,
                scope: DomainScope::Local
            }
        );
        assert_eq!(r.param("Height").unwrap().expr, Expr::attr("Crime"));
    }
}
