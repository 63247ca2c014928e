use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use super::{BinaryOp, DomainScope, Expr, Func, Mapping, UnaryOp};
use crate::table::{format_number, DomainStats, RowView, Value};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("unresolved identifier `{0}`")]
    UnresolvedIdentifier(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("attribute `${0}` used where no row or group is current")]
    NoCurrentRow(String),
    #[error("cannot index a {0}")]
    NotAList(&'static str),
    #[error("attribute `{0}` has no numeric domain")]
    NoDomain(String),
    #[error("{0}")]
    Runtime(String),
}

/// Name resolution for [`eval`]. Implementations decide what `$attr`,
/// identifiers and `norm()` domains mean in their context.
pub trait Scope {
    fn attribute(&self, name: &str) -> Result<Value, EvalError>;
    fn identifier(&self, name: &str) -> Result<Value, EvalError>;
    fn domain(&self, attribute: &str, scope: DomainScope) -> Result<DomainStats, EvalError>;
}

/// Upper bound on lists built by `range()`.
const MAX_RANGE: f64 = 1e7;

/// Evaluates `expr`. Division or remainder by zero and any infinity yield NaN;
/// both ternary branches are evaluated lazily.
pub fn eval<S: Scope + ?Sized>(expr: &Expr, scope: &S) -> Result<Value, EvalError> {
    Ok(match expr {
        Expr::Number(v) => Value::number(*v),
        Expr::Text(s) => Value::text(s),
        Expr::Attr(a) => scope.attribute(a)?,
        Expr::Ident(i) => scope.identifier(i)?,
        Expr::Unary(UnaryOp::Neg, e) => Value::number(-eval(e, scope)?.as_number()),
        Expr::Unary(UnaryOp::Not, e) => Value::Bool(!eval(e, scope)?.truthy()),
        Expr::Binary(BinaryOp::And, l, r) => {
            Value::Bool(eval(l, scope)?.truthy() && eval(r, scope)?.truthy())
        }
        Expr::Binary(BinaryOp::Or, l, r) => {
            Value::Bool(eval(l, scope)?.truthy() || eval(r, scope)?.truthy())
        }
        Expr::Binary(op, l, r) => binary(*op, &eval(l, scope)?, &eval(r, scope)?),
        Expr::Ternary(c, t, e) => {
            if eval(c, scope)?.truthy() {
                eval(t, scope)?
            } else {
                eval(e, scope)?
            }
        }
        Expr::Call(f, args) => {
            let vals = args
                .iter()
                .map(|a| eval(a, scope))
                .collect::<Result<Vec<_>, _>>()?;
            call(*f, &vals)?
        }
        Expr::List(items) => Value::list(
            items
                .iter()
                .map(|a| eval(a, scope))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        Expr::Index(base, idx) => {
            let base = eval(base, scope)?;
            let idx = eval(idx, scope)?.as_number();
            match base {
                Value::List(items) => index(&items, idx),
                Value::Null => Value::Null,
                other => return Err(EvalError::NotAList(other.type_name())),
            }
        }
        Expr::Norm {
            attr,
            mapping,
            scope: dscope,
        } => {
            let v = scope.attribute(attr)?.as_number();
            if *mapping == Mapping::Raw {
                Value::number(v)
            } else {
                let stats = scope.domain(attr, *dscope)?;
                Value::number(normalize(v, &stats, *mapping))
            }
        }
    })
}

fn index(items: &[Value], idx: f64) -> Value {
    if idx.is_nan() || idx < 0.0 || idx.fract() != 0.0 {
        return Value::Null;
    }
    items.get(idx as usize).cloned().unwrap_or(Value::Null)
}

fn binary(op: BinaryOp, l: &Value, r: &Value) -> Value {
    use std::cmp::Ordering;
    let arith = |f: fn(f64, f64) -> f64| Value::number(f(l.as_number(), r.as_number()));
    let order = || -> Option<Ordering> {
        match (l, r) {
            (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
            (Value::Null, _) | (_, Value::Null) => None,
            (Value::Text(_), _) | (_, Value::Text(_)) => None,
            (Value::List(_), _) | (_, Value::List(_)) => None,
            _ => l.as_number().partial_cmp(&r.as_number()),
        }
    };
    match op {
        BinaryOp::Add => arith(|a, b| a + b),
        BinaryOp::Sub => arith(|a, b| a - b),
        BinaryOp::Mul => arith(|a, b| a * b),
        BinaryOp::Div => arith(|a, b| a / b),
        BinaryOp::Rem => arith(|a, b| a % b),
        BinaryOp::Lt => Value::Bool(order() == Some(Ordering::Less)),
        BinaryOp::Gt => Value::Bool(order() == Some(Ordering::Greater)),
        BinaryOp::Le => Value::Bool(matches!(order(), Some(Ordering::Less | Ordering::Equal))),
        BinaryOp::Ge => Value::Bool(matches!(order(), Some(Ordering::Greater | Ordering::Equal))),
        BinaryOp::Eq => Value::Bool(equals(l, r) == Some(true)),
        BinaryOp::Ne => Value::Bool(equals(l, r) == Some(false)),
        BinaryOp::And | BinaryOp::Or => unreachable!("short-circuit operators handled by eval"),
    }
}

/// `None` when either side is NaN: every comparison with NaN is false.
fn equals(l: &Value, r: &Value) -> Option<bool> {
    let numeric = |v: &Value| matches!(v, Value::Number(_) | Value::Bool(_));
    if numeric(l) && numeric(r) {
        let (a, b) = (l.as_number(), r.as_number());
        if a.is_nan() || b.is_nan() {
            return None;
        }
        return Some(a == b);
    }
    Some(l == r)
}

fn call(f: Func, args: &[Value]) -> Result<Value, EvalError> {
    let num = |i: usize| args[i].as_number();
    Ok(match f {
        Func::Sqrt => Value::number(num(0).sqrt()),
        Func::Floor => Value::number(num(0).floor()),
        Func::Ceil => Value::number(num(0).ceil()),
        Func::Abs => Value::number(num(0).abs()),
        Func::Log => Value::number(num(0).ln()),
        Func::Min | Func::Max => {
            let nums: Vec<f64> = args
                .iter()
                .flat_map(|a| match a {
                    Value::List(items) => items.iter().map(Value::as_number).collect(),
                    other => vec![other.as_number()],
                })
                .collect();
            if nums.is_empty() || nums.iter().any(|v| v.is_nan()) {
                Value::number(f64::NAN)
            } else if f == Func::Min {
                Value::number(nums.iter().copied().fold(f64::INFINITY, f64::min))
            } else {
                Value::number(nums.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            }
        }
        Func::Split => match (&args[0], &args[1]) {
            (Value::Null, _) => Value::Null,
            (s, sep) => {
                let s = s.to_string();
                let sep = sep.to_string();
                if sep.is_empty() {
                    Value::list(vec![Value::text(&s)])
                } else {
                    Value::list(s.split(sep.as_str()).map(Value::text).collect())
                }
            }
        },
        Func::Len => match &args[0] {
            Value::List(items) => Value::number(items.len() as f64),
            Value::Text(s) => Value::number(s.chars().count() as f64),
            _ => Value::number(f64::NAN),
        },
        Func::Append => match &args[0] {
            Value::List(items) => {
                let mut v = items.to_vec();
                v.push(args[1].clone());
                Value::list(v)
            }
            Value::Null => Value::list(vec![args[1].clone()]),
            other => return Err(EvalError::NotAList(other.type_name())),
        },
        Func::Concat => match (&args[0], &args[1]) {
            (Value::List(a), Value::List(b)) => {
                Value::List(a.iter().chain(b.iter()).cloned().collect::<Arc<[Value]>>())
            }
            (a, b) => Value::text(format!("{}{}", display(a), display(b))),
        },
        Func::Range => {
            let n = num(0);
            if n.is_nan() || n <= 0.0 {
                Value::list(Vec::new())
            } else {
                let n = n.min(MAX_RANGE).floor() as usize;
                Value::list((0..n).map(|i| Value::Number(i as f64)).collect())
            }
        }
        Func::Reverse => match &args[0] {
            Value::List(items) => Value::list(items.iter().rev().cloned().collect()),
            Value::Null => Value::Null,
            other => return Err(EvalError::NotAList(other.type_name())),
        },
    })
}

fn display(v: &Value) -> String {
    match v {
        Value::Number(n) => format_number(*n),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

/// Maps `value` into [0, 1] over the domain in `stats`. A singleton domain
/// maps everything to 0.5; NaN stays NaN. Raw returns the value unchanged.
pub fn normalize(value: f64, stats: &DomainStats, mapping: Mapping) -> f64 {
    if value.is_nan() {
        return f64::NAN;
    }
    let (lo, hi) = (stats.min, stats.max);
    match mapping {
        Mapping::Raw => value,
        Mapping::Linear => {
            if lo == hi {
                0.5
            } else {
                ((value - lo) / (hi - lo)).clamp(0.0, 1.0)
            }
        }
        Mapping::Log => {
            if lo <= 0.0 || value <= 0.0 {
                f64::NAN
            } else if lo == hi {
                0.5
            } else {
                ((value.ln() - lo.ln()) / (hi.ln() - lo.ln())).clamp(0.0, 1.0)
            }
        }
    }
}

/// A self-contained binding context: variables, then accumulators, then
/// builtins, plus an optional current row and precomputed domains.
#[derive(Default, Clone)]
pub struct EvalContext<'t> {
    pub row: Option<RowView<'t>>,
    pub variables: HashMap<String, Value>,
    pub accumulators: HashMap<String, Value>,
    pub builtins: HashMap<String, Value>,
    pub domains: HashMap<(String, DomainScope), DomainStats>,
}

impl<'t> EvalContext<'t> {
    pub fn new() -> Self {
        EvalContext::default()
    }

    pub fn with_row(mut self, row: RowView<'t>) -> Self {
        self.row = Some(row);
        self
    }

    pub fn variable(mut self, name: &str, v: Value) -> Self {
        self.variables.insert(name.to_string(), v);
        self
    }

    pub fn accumulator(mut self, name: &str, v: Value) -> Self {
        self.accumulators.insert(name.to_string(), v);
        self
    }

    pub fn builtin(mut self, name: &str, v: Value) -> Self {
        self.builtins.insert(name.to_string(), v);
        self
    }

    pub fn domain_stats(mut self, scope: DomainScope, stats: DomainStats) -> Self {
        self.domains.insert((stats.attribute.clone(), scope), stats);
        self
    }
}

impl Scope for EvalContext<'_> {
    fn attribute(&self, name: &str) -> Result<Value, EvalError> {
        let row = self
            .row
            .ok_or_else(|| EvalError::NoCurrentRow(name.to_string()))?;
        row.get(name)
            .ok_or_else(|| EvalError::UnknownAttribute(name.to_string()))
    }

    fn identifier(&self, name: &str) -> Result<Value, EvalError> {
        self.variables
            .get(name)
            .or_else(|| self.accumulators.get(name))
            .or_else(|| self.builtins.get(name))
            .cloned()
            .ok_or_else(|| EvalError::UnresolvedIdentifier(name.to_string()))
    }

    fn domain(&self, attribute: &str, scope: DomainScope) -> Result<DomainStats, EvalError> {
        if let Some(s) = self.domains.get(&(attribute.to_string(), scope)) {
            return Ok(s.clone());
        }
        match (scope, self.row) {
            (DomainScope::Global, Some(row)) => row
                .table()
                .global_stats(attribute)
                .map_err(|_| EvalError::NoDomain(attribute.to_string())),
            _ => Err(EvalError::NoDomain(attribute.to_string())),
        }
    }
}
