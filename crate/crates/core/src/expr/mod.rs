//! The expression language used by every dataflow parameter.
//!
//! Precedence, loosest first: ternary, `||`, `&&`, comparisons, `+ -`,
//! `* / %`, unary `- !`, then indexing and calls. Lists are written
//! `{a, b, c}` and indexed from zero.

mod eval;
pub(crate) mod lexer;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use eval::{eval, normalize, EvalContext, EvalError, Scope};
pub use lexer::Pos;
pub use parser::parse_expr;
pub(crate) use parser::ExprParser;

#[derive(Debug, Clone, Error, PartialEq, Serialize)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(pos: Pos, message: impl Into<String>) -> ParseError {
        ParseError {
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Mapping {
    Linear,
    Log,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum DomainScope {
    Global,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Or,
    And,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinaryOp {
    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 2,
            BinaryOp::And => 3,
            BinaryOp::Lt
            | BinaryOp::Gt
            | BinaryOp::Le
            | BinaryOp::Ge
            | BinaryOp::Eq
            | BinaryOp::Ne => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => 6,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "||",
            BinaryOp::And => "&&",
            BinaryOp::Lt => "<",
            BinaryOp::Gt => ">",
            BinaryOp::Le => "<=",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Floor,
    Ceil,
    Abs,
    Min,
    Max,
    Log,
    Split,
    Len,
    Append,
    Concat,
    Range,
    Reverse,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "floor" => Func::Floor,
            "ceil" => Func::Ceil,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "log" => Func::Log,
            "split" => Func::Split,
            "len" => Func::Len,
            "append" => Func::Append,
            "concat" => Func::Concat,
            "range" => Func::Range,
            "reverse" => Func::Reverse,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Floor => "floor",
            Func::Ceil => "ceil",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Log => "log",
            Func::Split => "split",
            Func::Len => "len",
            Func::Append => "append",
            Func::Concat => "concat",
            Func::Range => "range",
            Func::Reverse => "reverse",
        }
    }

    /// Accepted argument counts as (min, max).
    pub fn arity(self) -> (usize, usize) {
        match self {
            Func::Min | Func::Max => (1, usize::MAX),
            Func::Split | Func::Append | Func::Concat => (2, 2),
            _ => (1, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Text(String),
    Attr(String),
    Ident(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    List(Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Norm {
        attr: String,
        mapping: Mapping,
        scope: DomainScope,
    },
}

/// Names an expression refers to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FreeRefs {
    pub attributes: BTreeSet<String>,
    pub identifiers: BTreeSet<String>,
}

impl Expr {
    pub fn attr(name: &str) -> Expr {
        Expr::Attr(name.to_string())
    }

    pub fn ident(name: &str) -> Expr {
        Expr::Ident(name.to_string())
    }

    pub fn free_refs(&self) -> FreeRefs {
        let mut refs = FreeRefs::default();
        self.collect_refs(&mut refs);
        refs
    }

    fn collect_refs(&self, refs: &mut FreeRefs) {
        match self {
            Expr::Number(_) | Expr::Text(_) => {}
            Expr::Attr(a) | Expr::Norm { attr: a, .. } => {
                refs.attributes.insert(a.clone());
            }
            Expr::Ident(i) => {
                refs.identifiers.insert(i.clone());
            }
            Expr::Unary(_, e) => e.collect_refs(refs),
            Expr::Binary(_, l, r) | Expr::Index(l, r) => {
                l.collect_refs(refs);
                r.collect_refs(refs);
            }
            Expr::Ternary(c, t, e) => {
                c.collect_refs(refs);
                t.collect_refs(refs);
                e.collect_refs(refs);
            }
            Expr::Call(_, args) | Expr::List(args) => {
                for a in args {
                    a.collect_refs(refs);
                }
            }
        }
    }

    /// Visits every node, parents before children.
    pub fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Unary(_, e) => e.walk(f),
            Expr::Binary(_, l, r) | Expr::Index(l, r) => {
                l.walk(f);
                r.walk(f);
            }
            Expr::Ternary(c, t, e) => {
                c.walk(f);
                t.walk(f);
                e.walk(f);
            }
            Expr::Call(_, args) | Expr::List(args) => args.iter().for_each(|a| a.walk(f)),
            _ => {}
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Ternary(..) => 1,
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(..) => 7,
            Expr::Number(v) if *v < 0.0 => 7,
            _ => 8,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.fmt_bare(f)?;
            return f.write_str(")");
        }
        self.fmt_bare(f)
    }

    fn fmt_bare(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => f.write_str(&crate::table::format_number(*v)),
            Expr::Text(s) => write_quoted(f, s),
            Expr::Attr(a) => write_attr(f, a),
            Expr::Ident(i) => f.write_str(i),
            Expr::Unary(op, e) => {
                f.write_str(match op {
                    UnaryOp::Neg => "-",
                    UnaryOp::Not => "!",
                })?;
                e.fmt_prec(f, 7)
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                l.fmt_prec(f, p)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_prec(f, p + 1)
            }
            Expr::Ternary(c, t, e) => {
                c.fmt_prec(f, 2)?;
                f.write_str(" ? ")?;
                t.fmt_prec(f, 1)?;
                f.write_str(" : ")?;
                e.fmt_prec(f, 1)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.fmt_prec(f, 0)?;
                }
                f.write_str(")")
            }
            Expr::List(items) => {
                f.write_str("{")?;
                for (i, a) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.fmt_prec(f, 0)?;
                }
                f.write_str("}")
            }
            Expr::Index(base, idx) => {
                base.fmt_prec(f, 8)?;
                f.write_str("[")?;
                idx.fmt_prec(f, 0)?;
                f.write_str("]")
            }
            Expr::Norm {
                attr,
                mapping,
                scope,
            } => {
                f.write_str("norm(")?;
                write_attr(f, attr)?;
                let m = match mapping {
                    Mapping::Linear => "linear",
                    Mapping::Log => "log",
                    Mapping::Raw => "raw",
                };
                match scope {
                    DomainScope::Global if *mapping == Mapping::Linear => {}
                    DomainScope::Global => write!(f, ", {m}")?,
                    DomainScope::Local => write!(f, ", {m}, local")?,
                }
                f.write_str(")")
            }
        }
    }
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

fn write_attr(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    f.write_str("$")?;
    if lexer::is_identifier(name) {
        f.write_str(name)
    } else {
        write_quoted(f, name)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn free_refs_examples() {
        let r = parse_expr("i + $Population/Sum").unwrap().free_refs();
        assert_eq!(
            r.attributes.into_iter().collect::<Vec<_>>(),
            vec!["Population"]
        );
        assert_eq!(
            r.identifiers.into_iter().collect::<Vec<_>>(),
            vec!["Sum", "i"]
        );

        let r = parse_expr("0.04").unwrap().free_refs();
        assert_eq!(r, FreeRefs::default());

        let r = parse_expr("{ $State, $County }[depth]")
            .unwrap()
            .free_refs();
        assert_eq!(
            r.attributes.into_iter().collect::<Vec<_>>(),
            vec!["County", "State"]
        );
        assert_eq!(r.identifiers.into_iter().collect::<Vec<_>>(), vec!["depth"]);
    }

    #[test]
    fn printing_keeps_needed_parentheses() {
        for src in [
            "(a + b) * c",
            "a - (b - c)",
            "-(a + b)",
            "(c ? a : b)[0]",
            "a ? b : c ? d : e",
            "(a ? b : c) ? d : e",
            "!(a && b) || c",
            "2 - -3",
            "norm($x, log, local) + norm($\"a b\")",
        ] {
            let e = parse_expr(src).unwrap();
            assert_eq!(parse_expr(&e.to_string()).unwrap(), e, "{src} -> {e}");
        }
        assert_eq!(
            parse_expr("(a + b) * c").unwrap().to_string(),
            "(a + b) * c"
        );
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Expr::Number),
            (-1e6f64..0.0).prop_map(Expr::Number),
            "[a-z]{1,6}".prop_map(Expr::Text),
            prop_oneof![Just("Population"), Just("State"), Just("a b")].prop_map(Expr::attr),
            prop_oneof![Just("i"), Just("depth"), Just("Sum")].prop_map(Expr::ident),
        ];
        leaf.prop_recursive(4, 48, 4, |inner| {
            let binop = prop_oneof![
                Just(BinaryOp::Or),
                Just(BinaryOp::And),
                Just(BinaryOp::Lt),
                Just(BinaryOp::Ne),
                Just(BinaryOp::Add),
                Just(BinaryOp::Sub),
                Just(BinaryOp::Mul),
                Just(BinaryOp::Div),
                Just(BinaryOp::Rem),
            ];
            prop_oneof![
                (binop, inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::Binary(
                    op,
                    Box::new(l),
                    Box::new(r)
                )),
                (inner.clone(), inner.clone(), inner.clone())
                    .prop_map(|(c, t, e)| { Expr::Ternary(Box::new(c), Box::new(t), Box::new(e)) }),
                inner
                    .clone()
                    .prop_filter("folded literal", |e| !matches!(e, Expr::Number(_)))
                    .prop_map(|e| Expr::Unary(UnaryOp::Neg, Box::new(e))),
                inner
                    .clone()
                    .prop_map(|e| Expr::Unary(UnaryOp::Not, Box::new(e))),
                prop::collection::vec(inner.clone(), 0..3).prop_map(Expr::List),
                (inner.clone(), inner.clone())
                    .prop_map(|(b, i)| Expr::Index(Box::new(b), Box::new(i))),
                prop::collection::vec(inner, 1..3).prop_map(|a| Expr::Call(Func::Max, a)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let printed = e.to_string();
            let reparsed = parse_expr(&printed).unwrap();
            prop_assert_eq!(&reparsed, &e, "printed: {}", printed);
            // and the printed form is a fixpoint
            prop_assert_eq!(reparsed.to_string(), printed);
        }
    }
}
