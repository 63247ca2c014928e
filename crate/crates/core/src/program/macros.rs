//! Parameterized program templates for common layouts. Each macro renders
//! program text and parses it, so its output is an ordinary program.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{parse_program, VizProgram};
use crate::expr::{Expr, ParseError};

pub const MACRO_NAMES: &[&str] = &[
    "plot2d",
    "histogram",
    "parallel_histograms",
    "adjusted_parallel_histograms",
    "grid_of",
    "treemap",
    "squarified_treemap",
    "parallel_coordinates",
];

#[derive(Debug, Clone, PartialEq)]
pub enum MacroArg {
    One(String),
    Many(Vec<String>),
}

impl MacroArg {
    /// Parses `a` or `a,b,c` (optionally bracketed).
    pub fn parse(s: &str) -> MacroArg {
        let t = s.trim().trim_start_matches('[').trim_end_matches(']');
        if t.contains(',') {
            MacroArg::Many(t.split(',').map(|p| p.trim().to_string()).collect())
        } else {
            MacroArg::One(t.trim().to_string())
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MacroError {
    #[error("unknown macro `{0}`; known macros: {known}", known = MACRO_NAMES.join(", "))]
    Unknown(String),
    #[error("macro `{0}` needs parameter `{1}`")]
    Missing(&'static str, &'static str),
    #[error("macro `{0}`: parameter `{1}` {2}")]
    Invalid(&'static str, &'static str, String),
    #[error("macro expansion produced invalid text: {0}")]
    Parse(#[from] ParseError),
}

struct Args<'a> {
    name: &'static str,
    map: &'a BTreeMap<String, MacroArg>,
}

impl Args<'_> {
    fn one(&self, key: &'static str) -> Result<String, MacroError> {
        match self.map.get(key) {
            Some(MacroArg::One(s)) if !s.is_empty() => Ok(attr(s)),
            Some(MacroArg::Many(v)) if v.len() == 1 => Ok(attr(&v[0])),
            Some(_) => Err(MacroError::Invalid(
                self.name,
                key,
                "must be a single attribute".into(),
            )),
            None => Err(MacroError::Missing(self.name, key)),
        }
    }

    fn opt(&self, key: &'static str) -> Result<Option<String>, MacroError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(_) => self.one(key).map(Some),
        }
    }

    fn raw(&self, key: &'static str) -> Option<String> {
        match self.map.get(key) {
            Some(MacroArg::One(s)) => Some(s.clone()),
            _ => None,
        }
    }

    fn many(&self, key: &'static str) -> Result<Vec<String>, MacroError> {
        let list = match self.map.get(key) {
            Some(MacroArg::Many(v)) => v.clone(),
            Some(MacroArg::One(s)) => vec![s.clone()],
            None => return Err(MacroError::Missing(self.name, key)),
        };
        if list.is_empty() || list.iter().any(|s| s.is_empty()) {
            return Err(MacroError::Invalid(
                self.name,
                key,
                "must list attribute names".into(),
            ));
        }
        Ok(list.iter().map(|s| attr(s)).collect())
    }

    fn number(&self, key: &'static str, default: f64) -> Result<String, MacroError> {
        match self.raw(key) {
            None => Ok(crate::table::format_number(default)),
            Some(s) => crate::table::parse_number(&s)
                .map(crate::table::format_number)
                .ok_or_else(|| {
                    MacroError::Invalid(self.name, key, format!("must be a number, got `{s}`"))
                }),
        }
    }
}

/// Attribute reference syntax for a column name.
fn attr(name: &str) -> String {
    Expr::attr(name).to_string()
}

/// Expands a named macro into a complete program.
pub fn expand_macro(
    name: &str,
    params: &BTreeMap<String, MacroArg>,
) -> Result<VizProgram, MacroError> {
    let name: &'static str = MACRO_NAMES
        .iter()
        .find(|n| **n == name)
        .ok_or_else(|| MacroError::Unknown(name.to_string()))?;
    let a = Args { name, map: params };
    let text = match name {
        "plot2d" => plot2d(&a)?,
        "histogram" => histogram(&a)?,
        "parallel_histograms" => parallel_histograms(&a)?,
        "adjusted_parallel_histograms" => adjusted(&a)?,
        "grid_of" => grid_of(&a)?,
        "treemap" => treemap(&a)?,
        "squarified_treemap" => squarified(&a)?,
        _ => parallel_coordinates(&a)?,
    };
    Ok(parse_program(&text)?)
}

fn plot2d(a: &Args) -> Result<String, MacroError> {
    let (x, y) = (a.one("x")?, a.one("y")?);
    let size = a.number("size", 0.04)?;
    Ok(format!(
        "Visualization {{
  FillEllipse {{
    X = {x};
    Y = {y};
    Width = {size};
    Height = {size};
  }}
}}
"
    ))
}

fn histogram(a: &Args) -> Result<String, MacroError> {
    let v = a.one("attr")?;
    Ok(format!(
        "Visualization {{
  Variable {{
    i = {{ init = 0; iter = i + 1 / Length; }}
  }}
  FillRectangle {{
    X = i;
    Y = 0;
    Width = 1 / Length;
    Height = {v};
  }}
}}
"
    ))
}

/// Stacked bars inside each row's full-height column.
fn bars(attrs: &[String]) -> String {
    let k = attrs.len();
    let mut s = String::new();
    for (j, at) in attrs.iter().enumerate() {
        let y = if j == 0 {
            "0".to_string()
        } else {
            format!("{j} / {k}")
        };
        s.push_str(&format!(
            "    FillRectangle {{ X = 0; Y = {y}; Width = 1; Height = norm({at}) / {k}; }}\n"
        ));
    }
    s
}

fn parallel_histograms(a: &Args) -> Result<String, MacroError> {
    let attrs = a.many("attrs")?;
    let sort = match a.opt("sort")? {
        Some(s) => s,
        None => attrs[0].clone(),
    };
    Ok(format!(
        "Visualization {{
  Sort = {sort};
  Variable {{
    i = {{ init = 0; iter = i + 1 / Length; }}
  }}
  FillRectangle {{
    X = i; Y = 0; Height = 1;
    Width = 1 / Length;
{bars}  }}
}}
",
        bars = bars(&attrs)
    ))
}

fn adjusted(a: &Args) -> Result<String, MacroError> {
    let w = a.one("weight")?;
    let attrs = a.many("attrs")?;
    Ok(format!(
        "Visualization {{
  Accumulator {{
    Sum = {{ init = 0; iter = Sum + {w}; }}
  }}
  Variable {{
    i = {{ init = 0; iter = i + {w} / Sum; }}
  }}
  FillRectangle {{
    X = i; Y = 0; Height = 1;
    Width = {w} / Sum;
{bars}  }}
}}
",
        bars = bars(&attrs)
    ))
}

fn grid_of(a: &Args) -> Result<String, MacroError> {
    let key = a.one("key")?;
    let (x, y) = (a.one("x")?, a.one("y")?);
    let special = match a.raw("special") {
        Some(s) => format!(
            "      {} {{
        FillEllipse {{ X = {x}; Y = {y}; Width = .08; Height = .08; Paint = black; }}
      }}\n",
            super::print_segment(&s)
        ),
        None => String::new(),
    };
    Ok(format!(
        "Visualization {{
  Partition = {key} {{
    Accumulator {{
      Rows = sqrt(childCount);
      Columns = floor(sqrt(childCount - 1)) + 1;
    }}
    Variable {{
      i = {{ init = 0; iter = i + 1; }}
    }}
    FillRectangle {{
      X = (i % Columns) / Columns;
      Y = floor(i / Columns) / Rows;
      Width = 1 / Columns;
      Height = 1 / Rows;
      Children {{
      * {{
        FillEllipse {{ X = {x}; Y = {y}; Width = .08; Height = .08; }}
      }}
{special}      }}
    }}
  }}
}}
"
    ))
}

fn treemap(a: &Args) -> Result<String, MacroError> {
    let (path, w) = (a.one("path")?, a.one("weight")?);
    let sep = Expr::Text(a.raw("separator").unwrap_or_else(|| "/".to_string())).to_string();
    Ok(format!(
        "Visualization {{
  Partition = split({path}, {sep})[depth] {{
    Accumulator {{
      Sum = {{ init = 0; iter = Sum + {w}; }}
      Horizontal = depth % 2;
    }}
    LocalVariable {{
      Position = {{ init = 0; iter = Position + {w} / Sum; }}
    }}
    FillRectangle {{
      X = Horizontal ? 0 : Position;
      Y = Horizontal ? Position : 0;
      Width = Horizontal ? 1 : {w} / Sum;
      Height = Horizontal ? {w} / Sum : 1;
    }}
  }}
}}
"
    ))
}

fn squarified(a: &Args) -> Result<String, MacroError> {
    let (path, w) = (a.one("path")?, a.one("weight")?);
    let sep = Expr::Text(a.raw("separator").unwrap_or_else(|| "/".to_string())).to_string();
    Ok(format!(
        "Visualization {{
  Partition = split({path}, {sep})[depth] {{
    Squarify {{ Weight = {w}; }}
    FillRectangle {{
      X = TileX;
      Y = TileY;
      Width = TileW;
      Height = TileH;
    }}
  }}
}}
"
    ))
}

fn parallel_coordinates(a: &Args) -> Result<String, MacroError> {
    let attrs = a.many("attrs")?;
    if attrs.len() < 2 {
        return Err(MacroError::Invalid(
            a.name,
            "attrs",
            "needs at least two attributes".into(),
        ));
    }
    let k = attrs.len() - 1;
    let mut points = String::new();
    for (j, at) in attrs.iter().enumerate() {
        let x = match j {
            0 => "0".to_string(),
            j if j == k => "1".to_string(),
            j => format!("{j} / {k}"),
        };
        points.push_str(&format!("    Point {{ X = {x}; Y = {at}; }}\n"));
    }
    Ok(format!(
        "Visualization {{
  Polyline {{
{points}  }}
}}
"
    ))
}
