use super::*;
use crate::expr::lexer::{tokenize, Tok};
use crate::expr::{ExprParser, ParseError};

/// Parses a complete `Visualization { ... }` program.
pub fn parse_program(text: &str) -> Result<VizProgram, ParseError> {
    let mut p = Parser {
        p: ExprParser::new(tokenize(text)?),
    };
    if p.p.at(&Tok::Eof) {
        return Err(ParseError::new(p.p.pos(), "empty program"));
    }
    let (kw, pos) = p.p.ident("`Visualization`")?;
    if kw != "Visualization" {
        return Err(ParseError::new(
            pos,
            format!("expected `Visualization`, found `{kw}`"),
        ));
    }
    p.p.expect(&Tok::LBrace, "`{`")?;
    let (root, _) = p.body(false)?;
    p.p.expect(&Tok::RBrace, "`}`")?;
    p.semis();
    if !p.p.at(&Tok::Eof) {
        return Err(p
            .p
            .unexpected("end of program (only one `Visualization` block is allowed)"));
    }
    Ok(VizProgram {
        root,
        source: text.to_string(),
    })
}

struct Parser {
    p: ExprParser,
}

const FOLD_FIELDS: &[&str] = &["init", "iter", "end"];

impl Parser {
    fn semis(&mut self) {
        while self.p.eat(&Tok::Semicolon) {}
    }

    fn assign(&mut self) -> Result<(), ParseError> {
        self.p.expect(&Tok::Assign, "`=`").map(|_| ())
    }

    /// Reads nodes up to (not including) the closing `}`. Inside a partition
    /// body a `MaxDepth = n;` setting is also accepted.
    fn body(&mut self, in_partition: bool) -> Result<(Vec<Node>, Option<usize>), ParseError> {
        let mut nodes = Vec::new();
        let mut max_depth = None;
        loop {
            self.semis();
            if self.p.at(&Tok::RBrace) {
                return Ok((nodes, max_depth));
            }
            let (kw, pos) = self.p.ident("an operator keyword")?;
            if in_partition && kw == "MaxDepth" {
                if max_depth.is_some() {
                    return Err(ParseError::new(pos, "duplicate parameter `MaxDepth`"));
                }
                self.assign()?;
                let v = self.number_literal("a depth")?;
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(ParseError::new(
                        pos,
                        "`MaxDepth` must be a nonnegative integer",
                    ));
                }
                max_depth = Some(v as usize);
                continue;
            }
            nodes.push(self.node(&kw, pos)?);
        }
    }

    fn node(&mut self, kw: &str, pos: Pos) -> Result<Node, ParseError> {
        if let Some(kind) = PrimKind::from_keyword(kw) {
            return Ok(Node::Primitive(Box::new(self.primitive(kind, pos)?)));
        }
        Ok(match kw {
            "Partition" => {
                self.assign()?;
                let key = self.p.expr()?;
                self.p.expect(&Tok::LBrace, "`{` after the partition key")?;
                let (body, max_depth) = self.body(true)?;
                self.p.expect(&Tok::RBrace, "`}`")?;
                Node::Partition(Partition {
                    key,
                    body,
                    max_depth,
                    pos,
                })
            }
            "Sort" => Node::Sort(self.sort(pos)?),
            "Order" => Node::Order(self.order(pos)?),
            "Filter" => {
                self.assign()?;
                Node::Filter(self.p.expr()?, pos)
            }
            "Variable" | "Variables" | "LocalVariable" | "LocalVariables" => {
                Node::Variables(self.decl_block()?)
            }
            "Accumulator" | "Accumulators" => Node::Accumulators(self.decl_block()?),
            "Children" => Node::Children(self.children()?),
            "RepeatGeometry" => Node::Repeat(self.repeat(pos)?),
            "Margin" => {
                self.assign()?;
                Node::Margin(self.number_literal("a margin fraction")?, pos)
            }
            "Squarify" => {
                self.p.expect(&Tok::LBrace, "`{`")?;
                let mut weight = None;
                self.fields(|this, name, npos| match name {
                    "Weight" if weight.is_none() => {
                        this.assign()?;
                        weight = Some(this.p.expr()?);
                        Ok(())
                    }
                    "Weight" => Err(dup(npos, name)),
                    _ => Err(unknown_field(npos, name, "Squarify")),
                })?;
                let weight =
                    weight.ok_or_else(|| ParseError::new(pos, "`Squarify` needs a `Weight`"))?;
                Node::Squarify(weight, pos)
            }
            _ => return Err(ParseError::new(pos, format!("unknown keyword `{kw}`"))),
        })
    }

    /// Runs `f` for every `Name ...` item of a `{ ... }` block whose opening
    /// brace was already consumed, then consumes the closing brace.
    fn fields(
        &mut self,
        mut f: impl FnMut(&mut Self, &str, Pos) -> Result<(), ParseError>,
    ) -> Result<(), ParseError> {
        loop {
            self.semis();
            if self.p.eat(&Tok::RBrace) {
                return Ok(());
            }
            let (name, pos) = self.p.ident("a field name")?;
            f(self, &name, pos)?;
        }
    }

    fn number_literal(&mut self, what: &str) -> Result<f64, ParseError> {
        let pos = self.p.pos();
        match self.p.expr()? {
            Expr::Number(v) => Ok(v),
            _ => Err(ParseError::new(
                pos,
                format!("expected a number literal for {what}"),
            )),
        }
    }

    fn sort(&mut self, pos: Pos) -> Result<SortSpec, ParseError> {
        if self.p.eat(&Tok::Assign) {
            return Ok(SortSpec {
                key: self.p.expr()?,
                descending: false,
                inner: Vec::new(),
                pos,
            });
        }
        self.p.expect(&Tok::LBrace, "`=` or `{` after `Sort`")?;
        let mut key = None;
        let mut descending = None;
        let mut inner: Option<Vec<StateDecl>> = None;
        self.fields(|this, name, npos| {
            match name {
                "Key" if key.is_none() => {
                    this.assign()?;
                    key = Some(this.p.expr()?);
                }
                "Descending" if descending.is_none() => {
                    this.assign()?;
                    descending = Some(this.number_literal("`Descending`")? != 0.0);
                }
                "Accumulator" | "Accumulators" if inner.is_none() => {
                    inner = Some(this.decl_block()?);
                }
                "Key" | "Descending" | "Accumulator" | "Accumulators" => {
                    return Err(dup(npos, name))
                }
                _ => return Err(unknown_field(npos, name, "Sort")),
            }
            Ok(())
        })?;
        Ok(SortSpec {
            key: key.ok_or_else(|| ParseError::new(pos, "`Sort` needs a `Key`"))?,
            descending: descending.unwrap_or(false),
            inner: inner.unwrap_or_default(),
            pos,
        })
    }

    fn order(&mut self, pos: Pos) -> Result<OrderSpec, ParseError> {
        self.p.expect(&Tok::LBrace, "`{`")?;
        let mut result = None;
        let mut accumulators: Option<Vec<StateDecl>> = None;
        self.fields(|this, name, npos| {
            match name {
                "Result" if result.is_none() => {
                    this.assign()?;
                    result = Some(this.p.expr()?);
                }
                "Accumulator" | "Accumulators" if accumulators.is_none() => {
                    accumulators = Some(this.decl_block()?);
                }
                "Result" | "Accumulator" | "Accumulators" => return Err(dup(npos, name)),
                _ => return Err(unknown_field(npos, name, "Order")),
            }
            Ok(())
        })?;
        Ok(OrderSpec {
            accumulators: accumulators.unwrap_or_default(),
            result: result.ok_or_else(|| ParseError::new(pos, "`Order` needs a `Result`"))?,
            pos,
        })
    }

    fn decl_block(&mut self) -> Result<Vec<StateDecl>, ParseError> {
        self.p.expect(&Tok::LBrace, "`{`")?;
        let mut decls: Vec<StateDecl> = Vec::new();
        self.fields(|this, name, pos| {
            if decls.iter().any(|d| d.name == name) {
                return Err(ParseError::new(
                    pos,
                    format!("duplicate declaration `{name}`"),
                ));
            }
            this.assign()?;
            let kind = this.state_kind()?;
            decls.push(StateDecl {
                name: name.to_string(),
                kind,
                pos,
            });
            Ok(())
        })?;
        Ok(decls)
    }

    fn state_kind(&mut self) -> Result<StateKind, ParseError> {
        let is_fold = self.p.at(&Tok::LBrace)
            && matches!(self.p.peek_at(1), Tok::Ident(f) if FOLD_FIELDS.contains(&f.as_str()))
            && self.p.peek_at(2) == &Tok::Assign;
        if is_fold {
            let open = self.p.expect(&Tok::LBrace, "`{`")?;
            let (mut init, mut iter, mut end) = (None, None, None);
            self.fields(|this, name, npos| {
                let slot = match name {
                    "init" => &mut init,
                    "iter" => &mut iter,
                    "end" => &mut end,
                    _ => return Err(unknown_field(npos, name, "a declaration")),
                };
                if slot.is_some() {
                    return Err(dup(npos, name));
                }
                this.assign()?;
                *slot = Some(this.p.expr()?);
                Ok(())
            })?;
            let init = init.ok_or_else(|| ParseError::new(open, "declaration needs `init`"))?;
            let iter = iter.ok_or_else(|| ParseError::new(open, "declaration needs `iter`"))?;
            return Ok(StateKind::Fold { init, iter, end });
        }
        if let (Tok::Ident(name), Tok::LParen) = (self.p.peek().clone(), self.p.peek_at(1)) {
            if let Some(agg) = Aggregate::from_name(&name) {
                self.p.advance();
                self.p.advance();
                let e = self.p.expr()?;
                self.p.expect(&Tok::RParen, "`)`")?;
                return Ok(StateKind::Predefined(agg, e));
            }
        }
        Ok(StateKind::Const(self.p.expr()?))
    }

    fn param(&mut self) -> Result<ParamSpec, ParseError> {
        self.assign()?;
        let pos = self.p.pos();
        let expr = self.p.expr()?;
        let mut spec = ParamSpec {
            expr,
            mapping: MappingSpec::Auto,
            scope: DomainScope::Global,
            anchor: Anchor::Start,
            pos,
        };
        if matches!(self.p.peek(), Tok::Ident(w) if w == "with") {
            self.p.advance();
            let (mut m, mut s, mut a) = (false, false, false);
            loop {
                let (word, wpos) = self
                    .p
                    .ident("`linear`, `log`, `raw`, `global`, `local`, `start` or `center`")?;
                let (seen, ok) = match word.as_str() {
                    "linear" | "log" | "raw" => (&mut m, true),
                    "global" | "local" => (&mut s, true),
                    "start" | "center" => (&mut a, true),
                    _ => (&mut m, false),
                };
                if !ok {
                    return Err(ParseError::new(wpos, format!("unknown modifier `{word}`")));
                }
                if *seen {
                    return Err(ParseError::new(
                        wpos,
                        format!("conflicting modifier `{word}`"),
                    ));
                }
                *seen = true;
                match word.as_str() {
                    "linear" => spec.mapping = MappingSpec::Linear,
                    "log" => spec.mapping = MappingSpec::Log,
                    "raw" => spec.mapping = MappingSpec::Raw,
                    "global" => spec.scope = DomainScope::Global,
                    "local" => spec.scope = DomainScope::Local,
                    "start" => spec.anchor = Anchor::Start,
                    _ => spec.anchor = Anchor::Center,
                }
                if !self.p.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        Ok(spec)
    }

    fn primitive(&mut self, kind: PrimKind, pos: Pos) -> Result<Primitive, ParseError> {
        self.p.expect(&Tok::LBrace, "`{`")?;
        let mut prim = Primitive {
            kind,
            params: Vec::new(),
            points: Vec::new(),
            paint: None,
            font_size: None,
            children: Vec::new(),
            pos,
        };
        self.fields(|this, name, npos| {
            if this.p.at(&Tok::LBrace) {
                match name {
                    "Paint" => {
                        if prim.paint.is_some() {
                            return Err(dup(npos, name));
                        }
                        prim.paint = Some(this.hsv()?);
                    }
                    "Font" => {
                        if prim.font_size.is_some() {
                            return Err(dup(npos, name));
                        }
                        this.p.advance();
                        let mut size = None;
                        this.fields(|t, f, fpos| match f {
                            "Size" if size.is_none() => {
                                size = Some(t.param()?);
                                Ok(())
                            }
                            "Size" => Err(dup(fpos, f)),
                            _ => Err(unknown_field(fpos, f, "Font")),
                        })?;
                        prim.font_size = Some(
                            size.ok_or_else(|| ParseError::new(npos, "`Font` needs a `Size`"))?,
                        );
                    }
                    "Point" if kind == PrimKind::Polyline => {
                        this.p.advance();
                        let (mut x, mut y) = (None, None);
                        this.fields(|t, f, fpos| {
                            let slot = match f {
                                "X" => &mut x,
                                "Y" => &mut y,
                                _ => return Err(unknown_field(fpos, f, "Point")),
                            };
                            if slot.is_some() {
                                return Err(dup(fpos, f));
                            }
                            *slot = Some(t.param()?);
                            Ok(())
                        })?;
                        match (x, y) {
                            (Some(x), Some(y)) => prim.points.push(Point { x, y }),
                            _ => return Err(ParseError::new(npos, "`Point` needs `X` and `Y`")),
                        }
                    }
                    "Partition" => {
                        return Err(ParseError::new(
                            npos,
                            "`Partition` is not allowed inside a primitive",
                        ))
                    }
                    _ => {
                        let node = this.node(name, npos)?;
                        match node {
                            Node::Primitive(_) | Node::Repeat(_) | Node::Children(_) => {
                                prim.children.push(node)
                            }
                            _ => {
                                return Err(ParseError::new(
                                    npos,
                                    format!("`{name}` is not allowed inside a primitive"),
                                ))
                            }
                        }
                    }
                }
                return Ok(());
            }
            if name == "Paint" {
                if prim.paint.is_some() {
                    return Err(dup(npos, name));
                }
                this.assign()?;
                let (color, cpos) = this.p.ident("a color name")?;
                if named_color(&color).is_none() {
                    return Err(ParseError::new(cpos, format!("unknown color `{color}`")));
                }
                prim.paint = Some(Paint::Named(color, cpos));
                return Ok(());
            }
            if !kind.params().contains(&name) {
                return Err(ParseError::new(
                    npos,
                    format!("unknown parameter `{name}` for `{}`", kind.keyword()),
                ));
            }
            if prim.param(name).is_some() {
                return Err(dup(npos, name));
            }
            let spec = this.param()?;
            prim.params.push((name.to_string(), spec));
            Ok(())
        })?;
        Ok(prim)
    }

    fn hsv(&mut self) -> Result<Paint, ParseError> {
        self.p.expect(&Tok::LBrace, "`{`")?;
        let (mut hue, mut saturation, mut value) = (None, None, None);
        self.fields(|this, name, npos| {
            let slot = match name {
                "hue" => &mut hue,
                "saturation" => &mut saturation,
                "value" => &mut value,
                _ => return Err(unknown_field(npos, name, "Paint")),
            };
            if slot.is_some() {
                return Err(dup(npos, name));
            }
            *slot = Some(this.param()?);
            Ok(())
        })?;
        Ok(Paint::Hsv {
            hue,
            saturation,
            value,
        })
    }

    fn children(&mut self) -> Result<Vec<ChildCase>, ParseError> {
        self.p.expect(&Tok::LBrace, "`{`")?;
        let mut cases = Vec::new();
        loop {
            self.semis();
            if self.p.eat(&Tok::RBrace) {
                return Ok(cases);
            }
            let pos = self.p.pos();
            let mut pattern = vec![self.segment()?];
            while self.p.eat(&Tok::Slash) {
                pattern.push(self.segment()?);
            }
            self.p.expect(&Tok::LBrace, "`{` after the path pattern")?;
            let (body, _) = self.body(false)?;
            self.p.expect(&Tok::RBrace, "`}`")?;
            cases.push(ChildCase { pattern, body, pos });
        }
    }

    fn segment(&mut self) -> Result<Segment, ParseError> {
        let seg = match self.p.peek().clone() {
            Tok::Star => Segment::Any,
            Tok::Ident(s) | Tok::Str(s) => Segment::Text(s),
            Tok::Number(v) => Segment::Number(v),
            Tok::Minus => {
                self.p.advance();
                match self.p.peek().clone() {
                    Tok::Number(v) => Segment::Number(-v),
                    _ => return Err(self.p.unexpected("a number")),
                }
            }
            _ => {
                return Err(self
                    .p
                    .unexpected("a path segment (`*`, a name, a string or a number)"))
            }
        };
        self.p.advance();
        Ok(seg)
    }

    fn repeat(&mut self, pos: Pos) -> Result<Repeat, ParseError> {
        self.p.expect(&Tok::LBrace, "`{`")?;
        let mut count = None;
        let mut index = None;
        let mut body = Vec::new();
        self.fields(|this, name, npos| {
            match name {
                "Count" if count.is_none() => {
                    this.assign()?;
                    count = Some(this.p.expr()?);
                }
                "Index" if index.is_none() => {
                    this.assign()?;
                    index = Some(this.p.ident("an index name")?.0);
                }
                "Count" | "Index" => return Err(dup(npos, name)),
                _ => {
                    let node = this.node(name, npos)?;
                    match node {
                        Node::Primitive(_) | Node::Repeat(_) => body.push(node),
                        _ => {
                            return Err(ParseError::new(
                                npos,
                                format!("`{name}` is not allowed inside `RepeatGeometry`"),
                            ))
                        }
                    }
                }
            }
            Ok(())
        })?;
        Ok(Repeat {
            count: count.ok_or_else(|| ParseError::new(pos, "`RepeatGeometry` needs a `Count`"))?,
            index: index.unwrap_or_else(|| DEFAULT_REPEAT_INDEX.to_string()),
            body,
            pos,
        })
    }
}

fn dup(pos: Pos, name: &str) -> ParseError {
    ParseError::new(pos, format!("duplicate parameter `{name}`"))
}

fn unknown_field(pos: Pos, name: &str, owner: &str) -> ParseError {
    ParseError::new(pos, format!("unknown field `{name}` in {owner}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_program() {
        let p = parse_program(
            "Visualization {
              FillEllipse {
                X = $Longitude;
                Y = $Latitude;
                Width = .04;
                // 4% of available width
                Height = .04;
              }
            }",
        )
        .unwrap();
        let [Node::Primitive(prim)] = p.root.as_slice() else {
            panic!("{p:?}")
        };
        assert_eq!(prim.kind, PrimKind::FillEllipse);
        assert_eq!(prim.param("X").unwrap().expr, Expr::attr("Longitude"));
        assert_eq!(prim.param("Y").unwrap().expr, Expr::attr("Latitude"));
        assert_eq!(prim.param("Width").unwrap().expr, Expr::Number(0.04));
        assert_eq!(prim.param("Height").unwrap().expr, Expr::Number(0.04));
    }

    #[test]
    fn parallel_histogram_program() {
        let p = parse_program(
            "Visualization {
              Sort = $Population;
              Variable { i= { init = 0; iter = i + 1/Length } }
              FillRectangle {
                X = i; Y=0; Height=1; // full height
                Width = 1/Length;
                FillRectangle { X=0; Y=0; Width=1; Height=norm($Population)/3 }
                FillRectangle { X=0; Y=1/3; Width=1; Height=norm($Climate)/3 }
                FillRectangle { X=0; Y=2/3; Width=1; Height=norm($Crime)/3 }
              }
            }",
        )
        .unwrap();
        assert!(matches!(p.root[0], Node::Sort(_)));
        let Node::Variables(vars) = &p.root[1] else {
            panic!()
        };
        assert_eq!(vars[0].name, "i");
        let Node::Primitive(outer) = &p.root[2] else {
            panic!()
        };
        assert_eq!(outer.children.len(), 3);
    }

    #[test]
    fn empty_program() {
        assert_eq!(parse_program("Visualization { }").unwrap().root, vec![]);
    }

    #[test]
    fn paper_listing_without_semicolons() {
        let p = parse_program(
            "Visualization {
              Accumulator { Sum= { init=0; iter=Sum+$Population } }
              Variable { i = { init=0; iter = i+$Population/ Sum } }
              FillRectangle { X=i; Y=0; Height=1
                Width=$Population/Sum }
            }",
        )
        .unwrap();
        assert_eq!(p.root.len(), 3);
    }

    #[test]
    fn treemap_listing() {
        let p = parse_program(
            "Visualization {
            Partition = split($Path, \"/\") [depth] {
              Accumulator {
                Sum= { init=0; iter=Sum+$FileSize; }
                Horizontal=depth%2;
              }
              LocalVariable { Position= { init=0; iter=Position+$FileSize/Sum } }
              FillRectangle {
                X=Horizontal?0:Position;
                Y=Horizontal?Position:0;
                Width= Horizontal?1:$FileSize/Sum;
                Height=Horizontal?$FileSize/Sum:1;
              }
            } }",
        )
        .unwrap();
        let Node::Partition(part) = &p.root[0] else {
            panic!()
        };
        let Node::Accumulators(acc) = &part.body[0] else {
            panic!()
        };
        assert!(matches!(acc[1].kind, StateKind::Const(_)));
        assert_eq!(part.max_depth(), DEFAULT_MAX_DEPTH);
    }

    #[test]
    fn modifiers_children_and_blocks() {
        let p = parse_program(
            "Visualization {
              Partition = $State {
                MaxDepth = 3;
                Accumulator { Rows = sqrt(childCount); Avg = Average($Crime) }
                FillRectangle {
                  X = $Crime with log, local, center; Y = 0; Width = 1; Height = 1;
                  Paint = black;
                  Children {
                    * { FillEllipse { X = $HousingCost; Y = $Climate; Width = .1; Height = .1 } }
                    CA/\"San Jose\"/3 { }
                  }
                }
              }
              Sort { Key = S; Descending = 1; Accumulator { S = Sum($Population) } }
              Filter = $Crime > 2
              Margin = 0.05
              Squarify { Weight = $Population }
              Order { Accumulator { L = { init = {}; iter = append(L, 1) } } Result = L }
              Line { X1 = 0; Y1 = 0; X2 = 1; Y2 = 1; Paint { hue = .75; saturation = .5; value = 1 } }
              Polyline { Point { X = 0; Y = $Crime } Point { X = 1; Y = $Climate } }
              DrawString { Text = $name; X = 0; Y = 0; Font { Size = 12 } }
              RepeatGeometry { Count = 3; Index = j; FillRectangle { X = j/3; Y = 0; Width = .3; Height = 1 } }
            }",
        )
        .unwrap();
        let Node::Partition(part) = &p.root[0] else {
            panic!()
        };
        assert_eq!(part.max_depth, Some(3));
        let Node::Primitive(rect) = &part.body[1] else {
            panic!()
        };
        let x = rect.param("X").unwrap();
        assert_eq!(
            (x.mapping, x.scope, x.anchor),
            (MappingSpec::Log, DomainScope::Local, Anchor::Center)
        );
        let Node::Children(cases) = &rect.children[0] else {
            panic!()
        };
        assert_eq!(cases[0].pattern, vec![Segment::Any]);
        assert_eq!(
            cases[1].pattern,
            vec![
                Segment::Text("CA".into()),
                Segment::Text("San Jose".into()),
                Segment::Number(3.0)
            ]
        );
        assert_eq!(p.root.len(), 10);
    }

    #[test]
    fn errors_name_the_problem() {
        let cases = [
            ("Visualization { Frobnicate { } }", "unknown keyword"),
            (
                "Visualization { FillEllipse { X = 1; X = 2 } }",
                "duplicate parameter",
            ),
            (
                "Visualization { FillEllipse { Colour = 1 } }",
                "unknown parameter",
            ),
            (
                "Visualization { FillEllipse { X = 1 +  } }",
                "expected an expression",
            ),
            ("Visualization { } Visualization { }", "only one"),
            ("Plot { }", "expected `Visualization`"),
            ("", "empty program"),
            (
                "Visualization { FillEllipse { Paint = mauve } }",
                "unknown color",
            ),
            (
                "Visualization { Variable { i = { init = 0 } } }",
                "needs `iter`",
            ),
            (
                "Visualization { FillEllipse { X = $a with sideways } }",
                "unknown modifier",
            ),
        ];
        for (src, needle) in cases {
            let err = parse_program(src).unwrap_err();
            assert!(err.message.contains(needle), "{src}: {err}");
        }
        let err = parse_program("Visualization {\n  FillEllipse {\n    X = ;\n  }\n}").unwrap_err();
        assert_eq!((err.line, err.col), (3, 9));
    }
}
