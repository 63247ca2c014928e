//! The visualization language: operator tree, parser, printer, validation
//! and macros.
//!
//! A program is one `Visualization { ... }` block whose body is a list of
//! operator nodes. Bodies nest through `Partition`, `Children` cases,
//! primitives and `RepeatGeometry`.

mod macros;
mod parser;
mod print;
mod validate;

use serde::Serialize;

use crate::expr::{DomainScope, Expr, Pos};

use print::print_segment;

pub use macros::{expand_macro, MacroArg, MacroError, MACRO_NAMES};
pub use parser::parse_program;
pub use validate::{resolve_mappings, validate, validate_with_table, Diagnostic};

pub const DEFAULT_MAX_DEPTH: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct VizProgram {
    pub root: Vec<Node>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Partition(Partition),
    Sort(SortSpec),
    Order(OrderSpec),
    Filter(Expr, Pos),
    Variables(Vec<StateDecl>),
    Accumulators(Vec<StateDecl>),
    Primitive(Box<Primitive>),
    Children(Vec<ChildCase>),
    Repeat(Repeat),
    Margin(f64, Pos),
    Squarify(Expr, Pos),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub key: Expr,
    pub body: Vec<Node>,
    pub max_depth: Option<usize>,
    pub pos: Pos,
}

impl Partition {
    pub fn max_depth(&self) -> usize {
        self.max_depth.unwrap_or(DEFAULT_MAX_DEPTH)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortSpec {
    pub key: Expr,
    pub descending: bool,
    pub inner: Vec<StateDecl>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderSpec {
    pub accumulators: Vec<StateDecl>,
    pub result: Expr,
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Aggregate {
    Sum,
    Average,
    Minimum,
    Maximum,
}

impl Aggregate {
    pub fn from_name(s: &str) -> Option<Aggregate> {
        Some(match s {
            "Sum" => Aggregate::Sum,
            "Average" => Aggregate::Average,
            "Minimum" => Aggregate::Minimum,
            "Maximum" => Aggregate::Maximum,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Aggregate::Sum => "Sum",
            Aggregate::Average => "Average",
            Aggregate::Minimum => "Minimum",
            Aggregate::Maximum => "Maximum",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    /// `name = { init = ..; iter = ..; end = .. }`
    Fold {
        init: Expr,
        iter: Expr,
        end: Option<Expr>,
    },
    /// `name = expr;` evaluated once, without a pass.
    Const(Expr),
    /// `name = Sum(expr);` and friends.
    Predefined(Aggregate, Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDecl {
    pub name: String,
    pub kind: StateKind,
    pub pos: Pos,
}

impl StateDecl {
    /// True when computing the value needs a pass over rows.
    pub fn needs_pass(&self) -> bool {
        !matches!(self.kind, StateKind::Const(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PrimKind {
    FillRectangle,
    FillEllipse,
    Line,
    Polyline,
    DrawString,
}

impl PrimKind {
    pub fn from_keyword(s: &str) -> Option<PrimKind> {
        Some(match s {
            "FillRectangle" => PrimKind::FillRectangle,
            "FillEllipse" => PrimKind::FillEllipse,
            "Line" => PrimKind::Line,
            "Polyline" => PrimKind::Polyline,
            "DrawString" => PrimKind::DrawString,
            _ => return None,
        })
    }

    pub fn keyword(self) -> &'static str {
        match self {
            PrimKind::FillRectangle => "FillRectangle",
            PrimKind::FillEllipse => "FillEllipse",
            PrimKind::Line => "Line",
            PrimKind::Polyline => "Polyline",
            PrimKind::DrawString => "DrawString",
        }
    }

    /// Required scalar parameters. Polyline takes `Point` blocks instead.
    pub fn params(self) -> &'static [&'static str] {
        match self {
            PrimKind::FillRectangle | PrimKind::FillEllipse => &["X", "Y", "Width", "Height"],
            PrimKind::Line => &["X1", "Y1", "X2", "Y2"],
            PrimKind::Polyline => &[],
            PrimKind::DrawString => &["Text", "X", "Y"],
        }
    }

    pub fn is_area(self) -> bool {
        matches!(self, PrimKind::FillRectangle | PrimKind::FillEllipse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MappingSpec {
    Auto,
    Linear,
    Log,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Anchor {
    Start,
    Center,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub expr: Expr,
    pub mapping: MappingSpec,
    pub scope: DomainScope,
    pub anchor: Anchor,
    pub pos: Pos,
}

impl ParamSpec {
    pub fn raw(expr: Expr) -> ParamSpec {
        ParamSpec {
            expr,
            mapping: MappingSpec::Auto,
            scope: DomainScope::Global,
            anchor: Anchor::Start,
            pos: Pos::default(),
        }
    }

    pub fn has_modifiers(&self) -> bool {
        self.mapping != MappingSpec::Auto
            || self.scope != DomainScope::Global
            || self.anchor != Anchor::Start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: ParamSpec,
    pub y: ParamSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Paint {
    Named(String, Pos),
    Hsv {
        hue: Option<ParamSpec>,
        saturation: Option<ParamSpec>,
        value: Option<ParamSpec>,
    },
}

/// Named colors accepted by `Paint = name;`, as RGB in [0, 1].
pub fn named_color(name: &str) -> Option<(f64, f64, f64)> {
    Some(match name {
        "black" => (0.0, 0.0, 0.0),
        "white" => (1.0, 1.0, 1.0),
        "gray" | "grey" => (0.5, 0.5, 0.5),
        "red" => (1.0, 0.0, 0.0),
        "green" => (0.0, 1.0, 0.0),
        "blue" => (0.0, 0.0, 1.0),
        "yellow" => (1.0, 1.0, 0.0),
        "orange" => (1.0, 0.5, 0.0),
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub kind: PrimKind,
    /// Scalar parameters in declaration order.
    pub params: Vec<(String, ParamSpec)>,
    pub points: Vec<Point>,
    pub paint: Option<Paint>,
    pub font_size: Option<ParamSpec>,
    /// Nested primitives, `RepeatGeometry` and `Children` nodes.
    pub children: Vec<Node>,
    pub pos: Pos,
}

impl Primitive {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    Any,
    Text(String),
    Number(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChildCase {
    pub pattern: Vec<Segment>,
    pub body: Vec<Node>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repeat {
    pub count: Expr,
    pub index: String,
    pub body: Vec<Node>,
    pub pos: Pos,
}

pub const DEFAULT_REPEAT_INDEX: &str = "k";

/// Identifiers the engine binds implicitly.
pub const BUILTINS: &[&str] = &["Length", "depth", "childCount", "recordCount", "index"];

/// Names bound while laying out elements of a `Squarify` scope.
pub const TILE_NAMES: &[&str] = &["TileX", "TileY", "TileW", "TileH"];

impl VizProgram {
    pub fn empty() -> VizProgram {
        VizProgram {
            root: Vec::new(),
            source: "Visualization { }".to_string(),
        }
    }
}
