use super::ast::{BinaryOp, Expr, UnaryOp};
use super::lexer::{tokenize, Tok};
use super::SyntaxError;
use crate::value::NaCode;

/// Parses a derived-variable expression.
///
/// Precedence, tightest first: unary `-`/`not`, `* /`, `+ -`, `++`,
/// comparisons (non-associative), `and`, `or`. `if c then a else b` may
/// appear wherever an operand can; its `else` branch extends as far right
/// as possible.
pub fn parse_expression(src: &str) -> Result<Expr, SyntaxError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let expr = p.expr()?;
    match p.peek() {
        Tok::Eof => Ok(expr),
        other => Err(p.error(format!("unexpected {}", other.describe()))),
    }
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].1
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let tok = self.tokens[self.pos].1.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError::new(self.offset(), message)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), SyntaxError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}, found {}", self.peek().describe())))
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        if *self.peek() == Tok::If {
            self.if_expr()
        } else {
            self.or()
        }
    }

    fn if_expr(&mut self) -> Result<Expr, SyntaxError> {
        self.expect(Tok::If, "`if`")?;
        let cond = self.expr()?;
        self.expect(Tok::Then, "`then`")?;
        let then = self.expr()?;
        self.expect(Tok::Else, "`else`")?;
        let otherwise = self.expr()?;
        Ok(Expr::If(Box::new(cond), Box::new(then), Box::new(otherwise)))
    }

    fn or(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.and()?;
            lhs = Expr::Binary(BinaryOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.comparison()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.comparison()?;
            lhs = Expr::Binary(BinaryOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn comparison_op(&self) -> Option<BinaryOp> {
        Some(match self.peek() {
            Tok::EqEq => BinaryOp::Eq,
            Tok::NotEq => BinaryOp::Ne,
            Tok::Lt => BinaryOp::Lt,
            Tok::Le => BinaryOp::Le,
            Tok::Gt => BinaryOp::Gt,
            Tok::Ge => BinaryOp::Ge,
            _ => return None,
        })
    }

    fn comparison(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.concat()?;
        let Some(op) = self.comparison_op() else {
            return Ok(lhs);
        };
        self.bump();
        let rhs = self.concat()?;
        if self.comparison_op().is_some() {
            return Err(self.error("comparisons cannot be chained; use `and`"));
        }
        Ok(Expr::Binary(op, Box::new(lhs), Box::new(rhs)))
    }

    fn concat(&mut self) -> Result<Expr, SyntaxError> {
        let first = self.additive()?;
        if *self.peek() != Tok::Concat {
            return Ok(first);
        }
        let mut parts = vec![first];
        while *self.peek() == Tok::Concat {
            self.bump();
            parts.push(self.additive()?);
        }
        Ok(Expr::Concat(parts))
    }

    fn additive(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.multiplicative()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        let op = match self.peek() {
            Tok::Minus => UnaryOp::Neg,
            Tok::Not => UnaryOp::Not,
            _ => return self.primary(),
        };
        self.bump();
        Ok(Expr::Unary(op, Box::new(self.unary()?)))
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                Ok(Expr::Number(v))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Expr::Ident(name))
            }
            Tok::If => self.if_expr(),
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Na => {
                self.bump();
                self.expect(Tok::LParen, "`(` after `na`")?;
                let code = match self.peek() {
                    Tok::Ident(s) if s.len() == 1 => NaCode::from_letter(s.chars().next().unwrap_or(' ')),
                    _ => None,
                }
                .ok_or_else(|| self.error("NA code must be a, b or c"))?;
                self.bump();
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Na(code))
            }
            Tok::IsNa => {
                self.bump();
                self.expect(Tok::LParen, "`(` after `is_na`")?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::IsNa(Box::new(e)))
            }
            other => Err(self.error(format!("expected an operand, found {}", other.describe()))),
        }
    }
}
