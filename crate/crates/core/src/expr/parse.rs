use thiserror::Error;

use super::{BinOp, Expr, Func};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at offset {offset}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the source text.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("empty expression")]
    Empty,
    #[error("unbalanced parenthesis")]
    UnbalancedParen,
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("dangling operator `{0}`")]
    DanglingOperator(char),
    #[error("malformed number `{0}`")]
    BadNumber(String),
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("unexpected token")]
    UnexpectedToken,
    #[error("expected `(` after function name `{0}`")]
    ExpectedCall(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' | '-' | '*' | '/' | '^' => {
                out.push((Tok::Op(c), i));
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ParseError {
                    kind: ParseErrorKind::BadNumber(text.to_string()),
                    offset: start,
                })?;
                out.push((Tok::Num(v), start));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                let ch = src[i..].chars().next().unwrap_or(c);
                return Err(ParseError {
                    kind: ParseErrorKind::UnexpectedChar(ch),
                    offset: i,
                });
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            kind,
            offset: self.offset(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.operand(if op == BinOp::Add { '+' } else { '-' }, Self::term)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let (op, ch) = if *c == '*' {
                (BinOp::Mul, '*')
            } else {
                (BinOp::Div, '/')
            };
            self.pos += 1;
            let rhs = self.operand(ch, Self::unary)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            let inner = self.operand('-', Self::unary)?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.operand('^', Self::unary)?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    /// Parse the right operand of `op`, reporting a dangling operator when
    /// nothing usable follows.
    fn operand(&mut self, op: char, rule: fn(&mut Self) -> Result<Expr, ParseError>) -> Result<Expr, ParseError> {
        match self.peek() {
            None | Some(Tok::RParen) => Err(ParseError {
                kind: ParseErrorKind::DanglingOperator(op),
                offset: self.toks[self.pos - 1].1,
            }),
            Some(Tok::Op(c)) if *c != '-' => Err(ParseError {
                kind: ParseErrorKind::DanglingOperator(op),
                offset: self.toks[self.pos - 1].1,
            }),
            _ => rule(self),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some((tok, offset)) = self.toks.get(self.pos).cloned() else {
            return Err(self.err(ParseErrorKind::UnexpectedToken));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Ident(name) if name == "x" => Ok(Expr::Var),
            Tok::Ident(name) => {
                let Some(func) = Func::from_name(&name) else {
                    return Err(ParseError {
                        kind: ParseErrorKind::UnknownIdentifier(name),
                        offset,
                    });
                };
                if self.peek() != Some(&Tok::LParen) {
                    return Err(ParseError {
                        kind: ParseErrorKind::ExpectedCall(name),
                        offset,
                    });
                }
                let open = self.toks[self.pos].1;
                self.pos += 1;
                let arg = self.parenthesised(open)?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Tok::LParen => self.parenthesised(offset),
            Tok::RParen => Err(ParseError {
                kind: ParseErrorKind::UnbalancedParen,
                offset,
            }),
            Tok::Op(c) => Err(ParseError {
                kind: ParseErrorKind::DanglingOperator(c),
                offset,
            }),
        }
    }

    /// Body of a parenthesised group whose `(` has been consumed.
    fn parenthesised(&mut self, open: usize) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Tok::RParen) {
            return Err(self.err(ParseErrorKind::UnexpectedToken));
        }
        let inner = self.expr()?;
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(inner)
            }
            None => Err(ParseError {
                kind: ParseErrorKind::UnbalancedParen,
                offset: open,
            }),
            Some(_) => Err(self.err(ParseErrorKind::UnexpectedToken)),
        }
    }
}

/// Parse `source` into an expression tree.
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    if toks.is_empty() {
        return Err(ParseError {
            kind: ParseErrorKind::Empty,
            offset: 0,
        });
    }
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: source.len(),
    };
    let e = p.expr()?;
    match p.peek() {
        None => Ok(e),
        Some(Tok::RParen) => Err(p.err(ParseErrorKind::UnbalancedParen)),
        Some(_) => Err(p.err(ParseErrorKind::UnexpectedToken)),
    }
}
