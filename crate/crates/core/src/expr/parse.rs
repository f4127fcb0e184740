//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := factor (('*' | '/') factor)*
//! factor   := '-' factor | power
//! power    := atom ('^' rational)?
//! rational := '-'? number | '(' '-'? number ('/' number)? ')'
//! atom     := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! A minus sign written directly in front of a number literal (and not
//! followed by `^`) produces a negative constant rather than a negation
//! node, so every printed tree reads back to itself.

use super::{BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("syntax error at offset {offset}: {message}")]
pub struct ParseError {
    /// 1-based character offset into the source.
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            out.push((t, start));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let text: String = chars[i..j].iter().collect();
            let value: f64 = text.parse().map_err(|_| ParseError {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((Tok::Num(value), start));
            i = j;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            out.push((Tok::Ident(chars[i..j].iter().collect()), start));
            i = j;
            continue;
        }
        return Err(ParseError {
            offset: start,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let idx = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[idx].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(format!(
                "expected {}, found {}",
                tok.describe(),
                self.peek().describe()
            ))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            if let Tok::Num(v) = *self.peek_at(1) {
                if *self.peek_at(2) != Tok::Caret {
                    self.bump();
                    self.bump();
                    return Ok(Expr::constant(-v));
                }
            }
            self.bump();
            let inner = self.factor()?;
            return Ok(Expr::unary(UnaryOp::Neg, inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let exponent = self.rational()?;
        Ok(Expr::bin(BinaryOp::Pow, base, Expr::constant(exponent)))
    }

    fn signed_number(&mut self) -> Option<f64> {
        let negative = *self.peek() == Tok::Minus;
        let skip = usize::from(negative);
        if let Tok::Num(v) = *self.peek_at(skip) {
            if negative {
                self.bump();
            }
            self.bump();
            Some(if negative { -v } else { v })
        } else {
            None
        }
    }

    fn rational(&mut self) -> Result<f64, ParseError> {
        let at = self.offset();
        if let Some(v) = self.signed_number() {
            return Ok(v);
        }
        if *self.peek() == Tok::LParen {
            self.bump();
            let Some(num) = self.signed_number() else {
                return Err(ParseError {
                    offset: at,
                    message: "non-constant exponent: expected a rational constant".into(),
                });
            };
            let value = if *self.peek() == Tok::Slash {
                self.bump();
                match self.bump() {
                    Tok::Num(den) if den != 0.0 => num / den,
                    _ => {
                        return Err(ParseError {
                            offset: at,
                            message: "non-constant exponent: malformed rational".into(),
                        })
                    }
                }
            } else {
                num
            };
            if *self.peek() != Tok::RParen {
                return Err(ParseError {
                    offset: at,
                    message: "non-constant exponent: expected a rational constant".into(),
                });
            }
            self.bump();
            return Ok(value);
        }
        Err(ParseError {
            offset: at,
            message: format!(
                "non-constant exponent: expected a rational constant, found {}",
                self.peek().describe()
            ),
        })
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::constant(v)),
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    let Some(op) = UnaryOp::from_function_name(&name) else {
                        return Err(ParseError {
                            offset: at,
                            message: format!("unknown function `{name}`"),
                        });
                    };
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::unary(op, arg))
                } else {
                    Ok(Expr::var(&name))
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            other => Err(ParseError {
                offset: at,
                message: format!("expected an operand, found {}", other.describe()),
            }),
        }
    }
}

/// Parses an expression under the usual precedence rules
/// (`^` > unary `-` > `*`,`/` > `+`,`-`; binary operators left-associative).
pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut parser = Parser { toks, pos: 0 };
    let e = parser.expr()?;
    if *parser.peek() != Tok::End {
        return parser.error(format!("unexpected {}", parser.peek().describe()));
    }
    Ok(e)
}
