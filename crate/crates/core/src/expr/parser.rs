use super::lexer::{tokenize, Pos, Tok, Token};
use super::{BinaryOp, DomainScope, Expr, Func, Mapping, ParseError, UnaryOp};

/// Parses one complete expression.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = ExprParser::new(tokens);
    if p.at(&Tok::Eof) {
        return Err(ParseError::new(p.pos(), "empty expression"));
    }
    let e = p.expr()?;
    if !p.at(&Tok::Eof) {
        return Err(p.unexpected("end of expression"));
    }
    Ok(e)
}

/// Recursive-descent parser over a token stream. The program parser drives
/// it directly for parameter expressions.
pub(crate) struct ExprParser {
    tokens: Vec<Token>,
    at: usize,
}

impl ExprParser {
    pub fn new(tokens: Vec<Token>) -> Self {
        ExprParser { tokens, at: 0 }
    }

    pub fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    pub fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.at + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    pub fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    pub fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    pub fn advance(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    pub fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, t: &Tok, what: &str) -> Result<Pos, ParseError> {
        if self.at(t) {
            Ok(self.advance().pos)
        } else {
            Err(self.unexpected(what))
        }
    }

    pub fn ident(&mut self, what: &str) -> Result<(String, Pos), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((s, self.advance().pos)),
            _ => Err(self.unexpected(what)),
        }
    }

    pub fn unexpected(&self, expected: &str) -> ParseError {
        ParseError::new(
            self.pos(),
            format!("expected {expected}, found {}", self.peek().describe()),
        )
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        let cond = self.binary(2)?;
        if self.eat(&Tok::Question) {
            let then = self.expr()?;
            self.expect(&Tok::Colon, "`:` in conditional")?;
            let other = self.expr()?;
            return Ok(Expr::Ternary(
                Box::new(cond),
                Box::new(then),
                Box::new(other),
            ));
        }
        Ok(cond)
    }

    fn binary_op(&self) -> Option<BinaryOp> {
        Some(match self.peek() {
            Tok::OrOr => BinaryOp::Or,
            Tok::AndAnd => BinaryOp::And,
            Tok::Lt => BinaryOp::Lt,
            Tok::Gt => BinaryOp::Gt,
            Tok::Le => BinaryOp::Le,
            Tok::Ge => BinaryOp::Ge,
            Tok::EqEq => BinaryOp::Eq,
            Tok::NotEq => BinaryOp::Ne,
            Tok::Plus => BinaryOp::Add,
            Tok::Minus => BinaryOp::Sub,
            Tok::Star => BinaryOp::Mul,
            Tok::Slash => BinaryOp::Div,
            Tok::Percent => BinaryOp::Rem,
            _ => return None,
        })
    }

    /// Precedence climbing over left-associative binary operators.
    fn binary(&mut self, min: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let p = op.precedence();
            if p < min {
                break;
            }
            self.advance();
            let rhs = self.binary(p + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(&Tok::Minus) {
            return Ok(match self.unary()? {
                Expr::Number(v) => Expr::Number(-v),
                e => Expr::Unary(UnaryOp::Neg, Box::new(e)),
            });
        }
        if self.eat(&Tok::Bang) {
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(self.unary()?)));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        while self.eat(&Tok::LBracket) {
            let idx = self.expr()?;
            self.expect(&Tok::RBracket, "`]`")?;
            e = Expr::Index(Box::new(e), Box::new(idx));
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Number(v) => {
                self.advance();
                Ok(Expr::Number(v))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::Text(s))
            }
            Tok::Attr(a) => {
                self.advance();
                Ok(Expr::Attr(a))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::LBrace => {
                self.advance();
                let items = self.comma_list(&Tok::RBrace)?;
                Ok(Expr::List(items))
            }
            Tok::Ident(name) => {
                self.advance();
                if !self.at(&Tok::LParen) {
                    return Ok(Expr::Ident(name));
                }
                self.advance();
                if name == "norm" {
                    return self.norm_args(pos);
                }
                let func = Func::from_name(&name)
                    .ok_or_else(|| ParseError::new(pos, format!("unknown function `{name}`")))?;
                let args = self.comma_list(&Tok::RParen)?;
                let (lo, hi) = func.arity();
                if args.len() < lo || args.len() > hi {
                    return Err(ParseError::new(
                        pos,
                        format!(
                            "`{name}` takes {} argument(s), got {}",
                            arity_text(lo, hi),
                            args.len()
                        ),
                    ));
                }
                Ok(Expr::Call(func, args))
            }
            _ => Err(self.unexpected("an expression")),
        }
    }

    fn comma_list(&mut self, close: &Tok) -> Result<Vec<Expr>, ParseError> {
        let mut items = Vec::new();
        if self.eat(close) {
            return Ok(items);
        }
        loop {
            items.push(self.expr()?);
            if self.eat(close) {
                return Ok(items);
            }
            self.expect(&Tok::Comma, "`,` or closing bracket")?;
        }
    }

    fn norm_args(&mut self, pos: Pos) -> Result<Expr, ParseError> {
        let attr = match self.peek().clone() {
            Tok::Attr(a) => {
                self.advance();
                a
            }
            _ => return Err(self.unexpected("an attribute reference in `norm`")),
        };
        let mut mapping = Mapping::Linear;
        let mut scope = DomainScope::Global;
        let mut seen = 0;
        while self.eat(&Tok::Comma) {
            let (word, wpos) = self.ident("a mapping or scope name")?;
            match word.as_str() {
                "linear" if seen == 0 => mapping = Mapping::Linear,
                "log" if seen == 0 => mapping = Mapping::Log,
                "raw" if seen == 0 => mapping = Mapping::Raw,
                "global" if seen == 1 => scope = DomainScope::Global,
                "local" if seen == 1 => scope = DomainScope::Local,
                _ => {
                    return Err(ParseError::new(
                        wpos,
                        format!("unexpected `{word}` in norm(); expected mapping then scope"),
                    ))
                }
            }
            seen += 1;
        }
        if seen > 2 {
            return Err(ParseError::new(pos, "norm() takes at most three arguments"));
        }
        self.expect(&Tok::RParen, "`)`")?;
        Ok(Expr::Norm {
            attr,
            mapping,
            scope,
        })
    }
}

fn arity_text(lo: usize, hi: usize) -> String {
    if hi == usize::MAX {
        format!("at least {lo}")
    } else if lo == hi {
        lo.to_string()
    } else {
        format!("{lo}..{hi}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(e: Expr) -> Box<Expr> {
        Box::new(e)
    }

    #[test]
    fn highlight_condition() {
        let e = parse_expr("$Population > 1M ? 1 : 0").unwrap();
        assert_eq!(
            e,
            Expr::Ternary(
                b(Expr::Binary(
                    BinaryOp::Gt,
                    b(Expr::attr("Population")),
                    b(Expr::Number(1e6))
                )),
                b(Expr::Number(1.0)),
                b(Expr::Number(0.0))
            )
        );
    }

    #[test]
    fn indexed_list_literal() {
        let e = parse_expr("{ $State, $County, $City } [depth]").unwrap();
        assert_eq!(
            e,
            Expr::Index(
                b(Expr::List(vec![
                    Expr::attr("State"),
                    Expr::attr("County"),
                    Expr::attr("City")
                ])),
                b(Expr::ident("depth"))
            )
        );
    }

    #[test]
    fn indexed_split_call() {
        let e = parse_expr("split($Path, \"/\")[depth]").unwrap();
        assert_eq!(
            e,
            Expr::Index(
                b(Expr::Call(
                    Func::Split,
                    vec![Expr::attr("Path"), Expr::Text("/".into())]
                )),
                b(Expr::ident("depth"))
            )
        );
    }

    #[test]
    fn precedence_ladder() {
        // a || b && c < d + e * -f
        let e = parse_expr("a || b && c < d + e * -f").unwrap();
        let Expr::Binary(BinaryOp::Or, _, rhs) = e else {
            panic!()
        };
        let Expr::Binary(BinaryOp::And, _, rhs) = *rhs else {
            panic!()
        };
        let Expr::Binary(BinaryOp::Lt, _, rhs) = *rhs else {
            panic!()
        };
        let Expr::Binary(BinaryOp::Add, _, rhs) = *rhs else {
            panic!()
        };
        let Expr::Binary(BinaryOp::Mul, _, rhs) = *rhs else {
            panic!()
        };
        assert_eq!(*rhs, Expr::Unary(UnaryOp::Neg, b(Expr::ident("f"))));
    }

    #[test]
    fn subtraction_is_left_associative() {
        let e = parse_expr("10 - 4 - 3").unwrap();
        assert_eq!(
            e,
            Expr::Binary(
                BinaryOp::Sub,
                b(Expr::Binary(
                    BinaryOp::Sub,
                    b(Expr::Number(10.0)),
                    b(Expr::Number(4.0))
                )),
                b(Expr::Number(3.0))
            )
        );
    }

    #[test]
    fn norm_forms() {
        assert_eq!(
            parse_expr("norm($a, log)").unwrap(),
            Expr::Norm {
                attr: "a".into(),
                mapping: Mapping::Log,
                scope: DomainScope::Global
            }
        );
        assert_eq!(
            parse_expr("norm($a, linear, local)").unwrap(),
            Expr::Norm {
                attr: "a".into(),
                mapping: Mapping::Linear,
                scope: DomainScope::Local
            }
        );
        assert!(parse_expr("norm(a)").is_err());
        assert!(parse_expr("norm($a, local)").is_err());
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_expr("1 +\n  * 2").unwrap_err();
        assert_eq!((err.line, err.col), (2, 3));
        let err = parse_expr("frobnicate(1)").unwrap_err();
        assert!(err.message.contains("unknown function"), "{err}");
        assert!(parse_expr("sqrt(1, 2)").is_err());
        assert!(parse_expr("").is_err());
        assert!(parse_expr("(1").is_err());
        assert!(parse_expr("1 2").is_err());
    }
}
