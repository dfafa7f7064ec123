//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := base ('^' INTEGER)?
//! base   := IDENT | INTEGER | '(' expr ')' | '-' base
//! ```
//!
//! Whitespace is insignificant. `3/4` parses as division, which has the same
//! semantics as a rational literal.

use num_bigint::BigInt;

use super::{ChartRef, Expr};
use crate::error::Error;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn next_token(&mut self) -> Result<(usize, Tok)> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((start, Tok::End));
        }
        let c = self.src[self.pos];
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' => {
                let mut end = self.pos;
                while end < self.src.len() && self.src[end].is_ascii_digit() {
                    end += 1;
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
                self.pos = end;
                return Ok((start, Tok::Int(text.parse::<BigInt>().unwrap())));
            }
            c if c.is_ascii_alphabetic() => {
                let mut end = self.pos;
                while end < self.src.len()
                    && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
                {
                    end += 1;
                }
                let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
                self.pos = end;
                return Ok((start, Tok::Ident(text.to_string())));
            }
            _ => {
                return Err(Error::Syntax {
                    pos: start,
                    expected: "operator, number, identifier or parenthesis".into(),
                })
            }
        };
        self.pos += 1;
        Ok((start, tok))
    }
}

struct Parser<'a> {
    chart: &'a ChartRef,
    lexer: Lexer<'a>,
    look: (usize, Tok),
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, chart: &'a ChartRef) -> Result<Self> {
        let mut lexer = Lexer::new(src);
        let look = lexer.next_token()?;
        Ok(Parser { chart, lexer, look })
    }

    fn advance(&mut self) -> Result<(usize, Tok)> {
        let next = self.lexer.next_token()?;
        Ok(std::mem::replace(&mut self.look, next))
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            match self.look.1 {
                Tok::Plus => {
                    self.advance()?;
                    acc = acc.add(&self.term()?);
                }
                Tok::Minus => {
                    self.advance()?;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            match self.look.1 {
                Tok::Star => {
                    self.advance()?;
                    acc = acc.mul(&self.factor()?);
                }
                Tok::Slash => {
                    self.advance()?;
                    acc = acc.div(&self.factor()?)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if self.look.1 == Tok::Caret {
            self.advance()?;
            let (pos, tok) = self.advance()?;
            match tok {
                Tok::Int(n) => {
                    let e: i64 = n.try_into().map_err(|_| Error::Syntax {
                        pos,
                        expected: "small integer exponent".into(),
                    })?;
                    return base.pow(e);
                }
                _ => {
                    return Err(Error::Syntax {
                        pos,
                        expected: "integer exponent".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        let (pos, tok) = self.advance()?;
        match tok {
            Tok::Ident(name) => Expr::coord_named(self.chart, &name),
            Tok::Int(n) => Ok(Expr::constant(
                self.chart,
                num_rational::BigRational::from(n),
            )),
            Tok::LParen => {
                let inner = self.expr()?;
                let (pos, tok) = self.advance()?;
                if tok != Tok::RParen {
                    return Err(Error::Syntax {
                        pos,
                        expected: "closing parenthesis".into(),
                    });
                }
                Ok(inner)
            }
            Tok::Minus => Ok(self.base()?.neg()),
            _ => Err(Error::Syntax {
                pos,
                expected: "identifier, number, `(` or `-`".into(),
            }),
        }
    }
}

/// Parse `text` into a canonical expression on `chart`.
pub fn parse_expr(text: &str, chart: &ChartRef) -> Result<Expr> {
    let mut p = Parser::new(text, chart)?;
    let e = p.expr()?;
    let (pos, tok) = p.advance()?;
    if tok != Tok::End {
        return Err(Error::Syntax {
            pos,
            expected: "end of input".into(),
        });
    }
    Ok(e)
}
