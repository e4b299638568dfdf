use super::ast::{BinOp, Expr, Span, Statement};
use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;

pub fn parse_statements(src: &str) -> Result<Vec<Statement>, SyntaxError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    p.program()
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        let found = self.peek();
        let what = match found {
            Tok::Ident(name) => format!("identifier `{name}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Str(s) => format!("string {s:?}"),
            other => other.to_string(),
        };
        SyntaxError::new(self.span(), &format!("unexpected {what}"), expected.iter().map(|s| s.to_string()).collect())
    }

    fn expect(&mut self, tok: Tok) -> PResult<Token> {
        if *self.peek() == tok {
            Ok(self.advance())
        } else {
            Err(self.error(&[&tok.to_string()]))
        }
    }

    fn skip_seps(&mut self) {
        while *self.peek() == Tok::Sep {
            self.advance();
        }
    }

    fn program(&mut self) -> PResult<Vec<Statement>> {
        let mut out = Vec::new();
        self.skip_seps();
        while *self.peek() != Tok::Eof {
            out.push(self.statement()?);
            match self.peek() {
                Tok::Sep => self.skip_seps(),
                Tok::Eof => {}
                _ => return Err(self.error(&["newline", "`;`", "end of input"])),
            }
        }
        Ok(out)
    }

    fn block(&mut self) -> PResult<Vec<Statement>> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        self.skip_seps();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.error(&["`}`"]));
            }
            out.push(self.statement()?);
            match self.peek() {
                Tok::Sep => self.skip_seps(),
                Tok::RBrace => {}
                _ => return Err(self.error(&["newline", "`;`", "`}`"])),
            }
        }
        self.advance();
        Ok(out)
    }

    fn statement(&mut self) -> PResult<Statement> {
        let span = self.span();
        match self.peek().clone() {
            Tok::For => {
                self.advance();
                let Tok::Ident(var) = self.peek().clone() else {
                    return Err(self.error(&["identifier"]));
                };
                self.advance();
                self.expect(Tok::In)?;
                let iterable = self.expr()?;
                let body = self.block()?;
                Ok(Statement::For { var, iterable, body, span })
            }
            Tok::If => self.if_statement(),
            Tok::Ident(name) if *self.peek_at(1) == Tok::Assign => {
                self.advance();
                self.advance();
                let value = self.expr()?;
                Ok(Statement::Assign { name, value, span })
            }
            Tok::Else => Err(self.error(&["statement"])),
            _ => {
                let expr = self.expr()?;
                if *self.peek() == Tok::Assign {
                    return Err(SyntaxError::new(
                        self.span(),
                        "only a plain variable name can be assigned to",
                        vec!["newline".into(), "`;`".into()],
                    ));
                }
                Ok(Statement::Expr { expr, span })
            }
        }
    }

    fn if_statement(&mut self) -> PResult<Statement> {
        let span = self.span();
        self.expect(Tok::If)?;
        let cond = self.expr()?;
        let then_body = self.block()?;
        // `else` may sit on the line after the closing brace.
        let mut look = self.pos;
        while self.toks[look].tok == Tok::Sep {
            look += 1;
        }
        let else_body = if self.toks[look].tok == Tok::Else {
            self.pos = look + 1;
            if *self.peek() == Tok::If {
                vec![self.if_statement()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Statement::If { cond, then_body, else_body, span })
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.additive()?;
        loop {
            let op = match self.peek() {
                Tok::EqEq => BinOp::Eq,
                Tok::NotEq => BinOp::Ne,
                Tok::Lt => BinOp::Lt,
                Tok::Gt => BinOp::Gt,
                Tok::Le => BinOp::Le,
                Tok::Ge => BinOp::Ge,
                _ => return Ok(lhs),
            };
            let span = self.advance().span;
            let rhs = self.additive()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let span = self.advance().span;
            let rhs = self.term()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let span = self.advance().span;
            let rhs = self.unary()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs), span };
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            let span = self.advance().span;
            let inner = self.unary()?;
            return Ok(match inner {
                Expr::Number { value, .. } => Expr::Number { value: -value, span },
                other => Expr::Binary {
                    op: BinOp::Sub,
                    lhs: Box::new(Expr::Number { value: 0.0, span }),
                    rhs: Box::new(other),
                    span,
                },
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while *self.peek() == Tok::LBracket {
            let span = self.advance().span;
            let index = self.expr()?;
            self.expect(Tok::RBracket)?;
            e = Expr::Index { target: Box::new(e), index: Box::new(index), span };
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Number(value) => {
                self.advance();
                Ok(Expr::Number { value, span })
            }
            Tok::Str(value) => {
                self.advance();
                Ok(Expr::Str { value, span })
            }
            Tok::Ident(name) => {
                self.advance();
                if *self.peek() == Tok::LParen {
                    self.advance();
                    let args = self.comma_list(Tok::RParen)?;
                    Ok(Expr::Call { name, args, span })
                } else {
                    Ok(Expr::Var { name, span })
                }
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::LBracket => {
                self.advance();
                let items = self.comma_list(Tok::RBracket)?;
                Ok(Expr::List { items, span })
            }
            _ => Err(self.error(&["identifier", "number", "string", "`(`", "`[`", "`-`"])),
        }
    }

    /// Items up to and including `close`; a trailing comma is allowed.
    fn comma_list(&mut self, close: Tok) -> PResult<Vec<Expr>> {
        let mut items = Vec::new();
        loop {
            if *self.peek() == close {
                self.advance();
                return Ok(items);
            }
            items.push(self.expr()?);
            match self.peek() {
                Tok::Comma => {
                    self.advance();
                }
                t if *t == close => {}
                _ => return Err(self.error(&["`,`", &close.to_string()])),
            }
        }
    }
}
