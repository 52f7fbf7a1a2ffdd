//! Recursive-descent parser for polynomial expressions.
//!
//! ```text
//! expr   := sign? term (('+' | '-') term)*
//! term   := unary (('*' | '/')? unary)*      // juxtaposition multiplies
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' digits)?
//! atom   := number | name | 'i' | '(' expr ')'
//! ```
//!
//! Numbers are plain decimals (`12`, `0.25`); exponent notation is not
//! accepted so that `2e1` cannot be confused with `2*e1`. Division is only
//! allowed by constants. `i` is the imaginary unit unless declared as a
//! variable.

use std::fmt;

use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::poly::{PolyError, Polynomial};
use crate::scalar::Scalar;

const MAX_DEPTH: usize = 128;
const MAX_EXPONENT: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
    pub excerpt: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at byte {}: expected {} in `{}`", self.offset, self.expected, self.excerpt)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Parser<'a, T: Scalar> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'a [String],
    depth: usize,
    _t: std::marker::PhantomData<T>,
}

fn excerpt(src: &str, offset: usize) -> String {
    let start = src[..offset.min(src.len())].rfind('\n').map_or(0, |i| i + 1);
    let end = src[start..].find('\n').map_or(src.len(), |i| start + i);
    src[start..end].to_string()
}

fn err(src: &str, offset: usize, expected: impl Into<String>) -> ParseError {
    let offset = offset.min(src.len());
    ParseError {
        offset,
        expected: expected.into(),
        excerpt: excerpt(src, offset),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, i)),
            b'-' => out.push((Tok::Minus, i)),
            b'*' => out.push((Tok::Star, i)),
            b'/' => out.push((Tok::Slash, i)),
            b'^' => out.push((Tok::Caret, i)),
            b'(' => out.push((Tok::LParen, i)),
            b')' => out.push((Tok::RParen, i)),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| err(src, start, "a number"))?;
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Name(src[start..i].to_string()), start));
                continue;
            }
            _ => return Err(err(src, start, "an operator, number, name or parenthesis")),
        }
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

impl<'a, T: Scalar> Parser<'a, T> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
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

    fn n(&self) -> usize {
        self.vars.len()
    }

    fn poly_err(&self, e: PolyError) -> ParseError {
        err(self.src, self.offset(), format!("a valid polynomial operation ({e})"))
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(err(self.src, self.offset(), format!("nesting depth at most {MAX_DEPTH}")));
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Polynomial<T>, ParseError> {
        self.enter()?;
        let mut acc = match self.peek() {
            Tok::Plus | Tok::Minus => Polynomial::zero(self.n()),
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let t = self.term()?;
                    acc = acc.try_add(&t).map_err(|e| self.poly_err(e))?;
                }
                Tok::Minus => {
                    self.bump();
                    let t = self.term()?;
                    acc = acc.try_sub(&t).map_err(|e| self.poly_err(e))?;
                }
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(acc)
    }

    fn starts_factor(&self) -> bool {
        matches!(self.peek(), Tok::Num(_) | Tok::Name(_) | Tok::LParen)
    }

    fn term(&mut self) -> Result<Polynomial<T>, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let f = self.unary()?;
                    acc = acc.try_mul(&f).map_err(|e| self.poly_err(e))?;
                }
                Tok::Slash => {
                    self.bump();
                    let at = self.offset();
                    let d = self.unary()?;
                    if d.degree() > 0 {
                        return Err(err(self.src, at, "a constant divisor"));
                    }
                    let c = d.constant_term();
                    if c.is_zero() {
                        return Err(err(self.src, at, "a nonzero divisor"));
                    }
                    acc = acc.scale(Complex::new(T::one(), T::zero()) / c);
                }
                _ if self.starts_factor() => {
                    let f = self.unary()?;
                    acc = acc.try_mul(&f).map_err(|e| self.poly_err(e))?;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Polynomial<T>, ParseError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                self.enter()?;
                let p = -&self.unary()?;
                self.depth -= 1;
                Ok(p)
            }
            Tok::Plus => {
                self.bump();
                self.enter()?;
                let p = self.unary()?;
                self.depth -= 1;
                Ok(p)
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial<T>, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let at = self.offset();
            match self.bump() {
                Tok::Num(v) if v <= MAX_EXPONENT as f64 && !self.src[at..].split(|c: char| !c.is_ascii_digit() && c != '.').next().unwrap_or("").contains('.') => {
                    Ok(base.pow(v as u32))
                }
                Tok::Num(_) => Err(err(self.src, at, format!("an integer exponent at most {MAX_EXPONENT}"))),
                _ => Err(err(self.src, at, "an unsigned integer exponent")),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Polynomial<T>, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Polynomial::real_constant(self.n(), T::lit(v))),
            Tok::Name(name) => {
                if let Some(j) = self.vars.iter().position(|v| *v == name) {
                    Ok(Polynomial::var(self.n(), j))
                } else if name == "i" {
                    Ok(Polynomial::constant(self.n(), Complex::new(T::zero(), T::one())))
                } else {
                    Err(err(self.src, at, format!("a declared variable (unknown `{name}`)")))
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                let close = self.offset();
                match self.bump() {
                    Tok::RParen => Ok(inner),
                    _ => Err(err(self.src, close, "`)`")),
                }
            }
            Tok::End => Err(err(self.src, at, "an operand")),
            _ => Err(err(self.src, at, "a number, variable or `(`")),
        }
    }
}

/// Parses `src` into a polynomial over the variables `vars` (in order).
pub fn parse_poly<T: Scalar, S: AsRef<str>>(src: &str, vars: &[S]) -> Result<Polynomial<T>, ParseError> {
    let names: Vec<String> = vars.iter().map(|s| s.as_ref().to_string()).collect();
    for (k, v) in names.iter().enumerate() {
        let valid = v.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid || names[..k].contains(v) {
            return Err(ParseError {
                offset: 0,
                expected: format!("distinct identifier variable names (got `{v}`)"),
                excerpt: String::new(),
            });
        }
    }
    let toks = lex(src)?;
    let mut p = Parser::<T> {
        src,
        toks,
        pos: 0,
        vars: &names,
        depth: 0,
        _t: std::marker::PhantomData,
    };
    if *p.peek() == Tok::End {
        return Err(err(src, 0, "an expression"));
    }
    let out = p.expr()?;
    match p.peek() {
        Tok::End => Ok(out),
        Tok::RParen => Err(err(src, p.offset(), "an operator (unbalanced `)`)")),
        _ => Err(err(src, p.offset(), "an operator or end of input")),
    }
}
