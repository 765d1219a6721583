//! Expression trees for analytic scalar fields and an infix parser.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' integer)?
//! atom    := number | 'x' index | func '(' sum ')' | '(' sum ')'
//! func    := 'exp' | 'sin' | 'cos'
//! ```
//!
//! Variables are `x1..xn` (one-based). Exponents must be non-negative integer
//! literals, and a divisor must not contain variables, so every parsed
//! expression is an entire function of its variables.

use alloc::boxed::Box;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based variable index.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Division by a variable-free subexpression.
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
        };
        let e = p.sum()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    /// Largest variable index referenced plus one (0 for constants).
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
        }
    }

    fn has_vars(&self) -> bool {
        self.arity() > 0
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Div(a, b) => write!(f, "{a}/({b})"),
            Expr::Pow(a, k) => write!(f, "({a})^{k}"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.product()?;
                lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.product()?;
                lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.unary()?;
                lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'/') {
                let at = self.pos;
                let rhs = self.unary()?;
                if rhs.has_vars() {
                    return Err(Error::Parse {
                        pos: at,
                        msg: "divisor must not depend on the variables".into(),
                    });
                }
                lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else if self.eat(b'+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("exponent must be a non-negative integer literal"));
            }
            let digits = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let k: u32 = digits
                .parse()
                .map_err(|_| self.err("exponent out of range"))?;
            Ok(Expr::Pow(Box::new(base), k))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let ident = core::str::from_utf8(&self.src[start..self.pos]).unwrap();
                let func = match ident {
                    "exp" => Some(Func::Exp),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    _ => None,
                };
                if let Some(func) = func {
                    if !self.eat(b'(') {
                        return Err(self.err("expected '(' after function name"));
                    }
                    let arg = self.sum()?;
                    if !self.eat(b')') {
                        return Err(self.err("expected ')'"));
                    }
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                let index = ident
                    .strip_prefix('x')
                    .and_then(|d| d.parse::<usize>().ok())
                    .filter(|&i| i >= 1)
                    .ok_or(Error::Parse {
                        pos: start,
                        msg: alloc::format!("unknown identifier `{ident}`"),
                    })?;
                Ok(Expr::Var(index - 1))
            }
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let bytes = self.src;
        let mut i = self.pos;
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
        self.pos = i;
        let text = core::str::from_utf8(&bytes[start..i]).unwrap();
        let v: f64 = text.parse().map_err(|_| Error::Parse {
            pos: start,
            msg: alloc::format!("malformed number `{text}`"),
        })?;
        Ok(Expr::Const(v))
    }
}

/// Collects the distinct variable indices of an expression in ascending order.
pub fn variables(e: &Expr) -> Vec<usize> {
    fn walk(e: &Expr, out: &mut Vec<usize>) {
        match e {
            Expr::Const(_) => {}
            Expr::Var(i) => out.push(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => walk(a, out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                walk(a, out);
                walk(b, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(e, &mut out);
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_precedence() {
        let e = Expr::parse("x1 + 2*x2^3").unwrap();
        assert_eq!(e.arity(), 2);
        match e {
            Expr::Add(_, rhs) => assert!(matches!(*rhs, Expr::Mul(_, _))),
            other => panic!("unexpected tree {other:?}"),
        }
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        // -x1^2 is -(x1^2)
        let e = Expr::parse("-x1^2").unwrap();
        assert!(matches!(e, Expr::Neg(ref inner) if matches!(**inner, Expr::Pow(_, 2))));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("y").is_err());
        assert!(Expr::parse("x1^x2").is_err());
        assert!(Expr::parse("x1/x2").is_err());
        assert!(Expr::parse("(x1").is_err());
        assert!(Expr::parse("x1 x2").is_err());
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("log(x1)").is_err());
    }

    #[test]
    fn numbers_with_exponents() {
        assert_eq!(Expr::parse("1.5e-3").unwrap(), Expr::Const(1.5e-3));
        assert_eq!(Expr::parse("2E2").unwrap(), Expr::Const(200.0));
    }

    #[test]
    fn collects_variables() {
        let e = Expr::parse("exp(x3)*x1 + x3").unwrap();
        assert_eq!(variables(&e), alloc::vec![0, 2]);
    }
}
