//! The tensor-entry mini-language.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := ('-')? atom ('^' integer)?
//! atom   := number | ident | '(' expr ')'
//! ```
//!
//! Identifiers are the coordinates `x1..xn` or named constants declared in
//! the problem file; constants are inlined at parse time. The language is
//! deliberately restricted to rational functions so that second-order jets
//! stay exact.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::jet::Jet2;

/// A parsed expression over coordinates `x1..xn`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// 0-based coordinate index.
    Coord(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, i32),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// `self + c` as a new AST node (used by the `I + N` nondegeneracy shift).
    pub fn plus_const(&self, c: f64) -> Expr {
        if self.is_zero_literal() {
            Expr::Const(c)
        } else {
            Expr::Add(Box::new(self.clone()), Box::new(Expr::Const(c)))
        }
    }

    /// Evaluate the value only.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Coord(k) => x[*k],
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(Error::DivisionByZero {
                        subexpr: b.to_string(),
                    });
                }
                a.eval(x)? / d
            }
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Pow(a, e) => {
                let v = a.eval(x)?;
                if v == 0.0 && *e < 0 {
                    return Err(Error::DivisionByZero {
                        subexpr: a.to_string(),
                    });
                }
                v.powi(*e)
            }
        })
    }

    /// Evaluate value, gradient and Hessian at `x`.
    pub fn eval_jet2(&self, x: &[f64]) -> Result<Jet2> {
        let n = x.len();
        Ok(match self {
            Expr::Const(c) => Jet2::constant(n, *c),
            Expr::Coord(k) => Jet2::coordinate(n, *k, x[*k]),
            Expr::Add(a, b) => a.eval_jet2(x)?.add(&b.eval_jet2(x)?),
            Expr::Sub(a, b) => a.eval_jet2(x)?.sub(&b.eval_jet2(x)?),
            Expr::Mul(a, b) => a.eval_jet2(x)?.mul(&b.eval_jet2(x)?),
            Expr::Div(a, b) => {
                let jb = b.eval_jet2(x)?;
                if jb.value == 0.0 {
                    return Err(Error::DivisionByZero {
                        subexpr: b.to_string(),
                    });
                }
                a.eval_jet2(x)?.div(&jb)
            }
            Expr::Neg(a) => a.eval_jet2(x)?.neg(),
            Expr::Pow(a, e) => {
                let ja = a.eval_jet2(x)?;
                if ja.value == 0.0 && *e < 0 {
                    return Err(Error::DivisionByZero {
                        subexpr: a.to_string(),
                    });
                }
                ja.powi(*e)
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(_) | Expr::Coord(_) => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let p = self.precedence();
        if p < min {
            write!(f, "(")?;
        }
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    // keep negative literals reparseable without sign tokens
                    write!(f, "({})", c)?;
                } else {
                    write!(f, "{}", c)?;
                }
            }
            Expr::Coord(k) => write!(f, "x{}", k + 1)?,
            Expr::Add(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " + ")?;
                b.fmt_prec(f, 2)?;
            }
            Expr::Sub(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " - ")?;
                b.fmt_prec(f, 2)?;
            }
            Expr::Mul(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "*")?;
                b.fmt_prec(f, 3)?;
            }
            Expr::Div(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, "/")?;
                b.fmt_prec(f, 3)?;
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_prec(f, 4)?;
            }
            Expr::Pow(a, e) => {
                a.fmt_prec(f, 5)?;
                if *e < 0 {
                    write!(f, "^({})", e)?;
                } else {
                    write!(f, "^{}", e)?;
                }
            }
        }
        if p < min {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Parse `source` over `dim` coordinates with the given named constants.
pub fn parse(source: &str, dim: usize, constants: &BTreeMap<String, f64>) -> Result<Expr> {
    if source.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            expected: "nonempty expression".into(),
        });
    }
    let mut p = Parser {
        src: source.as_bytes(),
        pos: 0,
        dim,
        constants,
    };
    let e = p.parse_expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(Error::Syntax {
            offset: p.pos,
            expected: "end of input or operator".into(),
        });
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
    constants: &'a BTreeMap<String, f64>,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn parse_expr(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.parse_term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_term(&mut self) -> Result<Expr> {
        let mut lhs = self.parse_factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.parse_factor()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn parse_factor(&mut self) -> Result<Expr> {
        let negated = if self.peek() == Some(b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let mut e = self.parse_atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.parse_int_exponent()?;
            e = Expr::Pow(Box::new(e), exp);
        }
        // power binds tighter than unary minus: -x1^2 == -(x1^2)
        if negated {
            e = Expr::Neg(Box::new(e));
        }
        Ok(e)
    }

    fn parse_int_exponent(&mut self) -> Result<i32> {
        self.skip_ws();
        let paren = self.src.get(self.pos) == Some(&b'(');
        if paren {
            self.pos += 1;
            self.skip_ws();
        }
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(Error::Syntax {
                offset: self.pos,
                expected: "integer exponent".into(),
            });
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: i32 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            expected: "integer exponent in i32 range".into(),
        })?;
        if paren {
            self.skip_ws();
            if self.src.get(self.pos) != Some(&b')') {
                return Err(Error::Syntax {
                    offset: self.pos,
                    expected: "`)` closing exponent".into(),
                });
            }
            self.pos += 1;
        }
        Ok(value)
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.parse_expr()?;
                if self.peek() != Some(b')') {
                    return Err(Error::Syntax {
                        offset: self.pos,
                        expected: "`)`".into(),
                    });
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.parse_ident(),
            _ => Err(Error::Syntax {
                offset: self.pos,
                expected: "number, identifier or `(`".into(),
            }),
        }
    }

    fn parse_number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            let ds = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == ds {
                // not an exponent after all (e.g. an identifier follows)
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            expected: "numeric literal".into(),
        })?;
        Ok(Expr::Const(value))
    }

    fn parse_ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .to_string();
        if let Some(idx) = coordinate_index(&name) {
            if idx <= self.dim {
                return Ok(Expr::Coord(idx - 1));
            }
            return Err(Error::UnknownIdent {
                name: format!("{} (only x1..x{} available)", name, self.dim),
                offset: start,
            });
        }
        if let Some(c) = self.constants.get(&name) {
            return Ok(Expr::Const(*c));
        }
        Err(Error::UnknownIdent {
            name,
            offset: start,
        })
    }
}

/// `x1`, `x2`, ... -> 1-based index; anything else -> None.
fn coordinate_index(name: &str) -> Option<usize> {
    let rest = name.strip_prefix('x')?;
    if rest.is_empty() || rest.starts_with('0') || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}
