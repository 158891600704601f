//! Text syntax for scalar fields.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' ['-' | '+'] INTEGER | '^' '(' ['-' | '+'] INTEGER ')')?
//! atom   := NUMBER | 'i' | VAR | FUNC '(' expr ')' | 'min' '(' expr ',' expr ')'
//!         | '(' expr ')'
//! VAR    := 'x' DIGITS            (x1, x2, …; 1-based)
//! FUNC   := 'exp' | 'log' | 'abs'
//! ```
//!
//! Whitespace is ignored between tokens. `^` binds tighter than unary minus,
//! so `-x1^2` is `-(x1^2)`. Powers are integers with `|n| ≤ 256`; chained
//! powers need parentheses. `abs` and `min` accept real arguments only.

use num_complex::Complex64;

use super::expr::Expr;
use crate::error::{Error, Result};

const MAX_DEPTH: usize = 200;
const MAX_POWER: i64 = 256;
const MAX_VARIABLE: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let c = bytes[pos];
        let start = pos;
        let single = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                pos += 1;
                continue;
            }
            b'+' => Some(Token::Plus),
            b'-' => Some(Token::Minus),
            b'*' => Some(Token::Star),
            b'/' => Some(Token::Slash),
            b'^' => Some(Token::Caret),
            b'(' => Some(Token::LParen),
            b')' => Some(Token::RParen),
            b',' => Some(Token::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((start, tok));
            pos += 1;
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while pos < bytes.len() && (bytes[pos].is_ascii_digit() || bytes[pos] == b'.') {
                pos += 1;
            }
            if pos < bytes.len() && (bytes[pos] == b'e' || bytes[pos] == b'E') {
                let mut look = pos + 1;
                if look < bytes.len() && (bytes[look] == b'+' || bytes[look] == b'-') {
                    look += 1;
                }
                if look < bytes.len() && bytes[look].is_ascii_digit() {
                    pos = look;
                    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                        pos += 1;
                    }
                }
            }
            let lexeme = &text[start..pos];
            let value: f64 = lexeme.parse().map_err(|_| Error::Parse {
                offset: start,
                message: format!("invalid number `{lexeme}`"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    offset: start,
                    message: format!("number `{lexeme}` is not finite"),
                });
            }
            out.push((start, Token::Number(value)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            out.push((start, Token::Ident(text[start..pos].to_string())));
            continue;
        }
        let ch = text[start..].chars().next().unwrap_or('?');
        return Err(Error::Parse {
            offset: start,
            message: format!("unexpected character `{ch}`"),
        });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<()> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return self.error("expression is nested too deeply");
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr> {
        self.enter()?;
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    acc = Expr::add(acc, self.term()?);
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    acc = Expr::sub(acc, self.term()?);
                }
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    acc = Expr::mul(acc, self.unary()?);
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    acc = Expr::div(acc, self.unary()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr> {
        self.enter()?;
        let out = match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                Expr::neg(self.unary()?)
            }
            Some(Token::Plus) => {
                self.pos += 1;
                self.unary()?
            }
            _ => self.power()?,
        };
        self.depth -= 1;
        Ok(out)
    }

    fn signed_integer(&mut self) -> Result<i32> {
        let negative = match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                true
            }
            Some(Token::Plus) => {
                self.pos += 1;
                false
            }
            _ => false,
        };
        match self.peek() {
            Some(Token::Number(v)) if v.fract() == 0.0 && v.abs() <= MAX_POWER as f64 => {
                let v = *v as i64;
                self.pos += 1;
                Ok(if negative { -v } else { v } as i32)
            }
            Some(Token::Number(_)) => {
                self.error(format!("exponent must be an integer with magnitude at most {MAX_POWER}"))
            }
            _ => self.error("expected an integer exponent"),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() != Some(&Token::Caret) {
            return Ok(base);
        }
        self.pos += 1;
        let n = if self.peek() == Some(&Token::LParen) {
            self.pos += 1;
            let n = self.signed_integer()?;
            self.expect(Token::RParen, "`)` after exponent")?;
            n
        } else {
            self.signed_integer()?
        };
        if self.peek() == Some(&Token::Caret) {
            return self.error("chained powers need parentheses");
        }
        Ok(Expr::powi(base, n))
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Token::Number(v)) => Ok(Expr::real(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(e)
            }
            Some(Token::Ident(name)) => self.ident(&name),
            Some(_) => {
                self.pos -= 1;
                self.error("expected a number, variable, function or `(`")
            }
            None => self.error("unexpected end of input"),
        }
    }

    fn ident(&mut self, name: &str) -> Result<Expr> {
        match name {
            "i" => return Ok(Expr::constant(Complex64::new(0.0, 1.0))),
            "exp" | "log" | "abs" => {
                self.expect(Token::LParen, &format!("`(` after `{name}`"))?;
                let arg = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                return Ok(match name {
                    "exp" => Expr::exp(arg),
                    "log" => Expr::log(arg),
                    _ => Expr::abs(arg),
                });
            }
            "min" => {
                self.expect(Token::LParen, "`(` after `min`")?;
                let a = self.expr()?;
                self.expect(Token::Comma, "`,` in `min(a, b)`")?;
                let b = self.expr()?;
                self.expect(Token::RParen, "`)`")?;
                return Ok(Expr::min(a, b));
            }
            _ => {}
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().unwrap_or(0);
                if index == 0 || index > MAX_VARIABLE {
                    self.pos -= 1;
                    return self.error(format!(
                        "variables are numbered x1..x{MAX_VARIABLE}, found `{name}`"
                    ));
                }
                return Ok(Expr::var(index - 1));
            }
        }
        self.pos -= 1;
        self.error(format!("unknown identifier `{name}`"))
    }
}

/// Parses field text into an expression tree over 0-based variable indices.
pub fn parse_expr(text: &str) -> Result<Expr> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: text.len(),
        depth: 0,
    };
    if p.peek().is_none() {
        return p.error("empty expression");
    }
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.error("unexpected trailing input");
    }
    Ok(e)
}
