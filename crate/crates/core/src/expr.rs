//! Tiny expression language for potentials on the torus.
//!
//! Grammar (recursive descent):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | '+' unary | atom
//! atom   := number | 'pi' | coord | ('sin' | 'cos') '(' expr ')' | '(' expr ')'
//! coord  := 'x' | 'y' | 'x' digit+ | 'y' digit+
//! ```
//!
//! `x` and `y` are aliases of `x1` and `y1`. Coordinates are 1-based.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Real coordinate `x_k` (`imag = false`) or `y_k`, 0-based `k`.
    Coord { imag: bool, k: usize },
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

impl Expr {
    /// Evaluates at `x = (x_1..x_n)`, `y = (y_1..y_n)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Coord { imag: false, k } => x[*k],
            Expr::Coord { imag: true, k } => y[*k],
            Expr::Neg(a) => -a.eval(x, y),
            Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Expr::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Expr::Sin(a) => a.eval(x, y).sin(),
            Expr::Cos(a) => a.eval(x, y).cos(),
        }
    }

    /// Largest 1-based coordinate index used, 0 for constants.
    pub fn max_coord(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Coord { k, .. } => k + 1,
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) => a.max_coord(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => a.max_coord().max(b.max_coord()),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser { s: src.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::Parse(format!("{what} at offset {} in expression", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.s.len() && (self.s[self.pos] == b'e' || self.s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.s.len() && (self.s[self.pos] == b'+' || self.s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
        text.parse::<f64>().map(Expr::Const).map_err(|_| self.error("bad number"))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let word = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii");
        match word {
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "sin" | "cos" => {
                if !self.eat(b'(') {
                    return Err(self.error("expected '(' after function name"));
                }
                let arg = Box::new(self.expr()?);
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(if word == "sin" { Expr::Sin(arg) } else { Expr::Cos(arg) })
            }
            _ => {
                let (head, digits) = word.split_at(1);
                let imag = match head {
                    "x" => false,
                    "y" => true,
                    _ => return Err(Error::Parse(format!("unknown identifier '{word}'"))),
                };
                let k = if digits.is_empty() {
                    1
                } else {
                    digits.parse::<usize>().map_err(|_| Error::Parse(format!("unknown identifier '{word}'")))?
                };
                if k == 0 {
                    return Err(Error::Parse("coordinates are 1-based".into()));
                }
                Ok(Expr::Coord { imag, k: k - 1 })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ev(s: &str, x: &[f64], y: &[f64]) -> f64 {
        parse(s).unwrap().eval(x, y)
    }

    #[test]
    fn precedence_and_unary() {
        assert_eq!(ev("1 + 2 * 3", &[0.0], &[0.0]), 7.0);
        assert_eq!(ev("-2 * -3", &[0.0], &[0.0]), 6.0);
        assert_eq!(ev("(1 + 2) * 3 - 4 / 2", &[0.0], &[0.0]), 7.0);
        assert_eq!(ev("2 - 3 - 4", &[0.0], &[0.0]), -5.0);
        assert_eq!(ev("1.5e-1", &[0.0], &[0.0]), 0.15);
    }

    #[test]
    fn coordinates_and_functions() {
        let v = ev("0.1*sin(2*pi*x1) + cos(2*pi*y2)*x", &[0.25, 0.5], &[0.0, 0.5]);
        assert!((v - (0.1 - 0.25)).abs() < 1e-15);
        assert_eq!(ev("y", &[0.0], &[0.7]), 0.7);
        assert_eq!(parse("x2 + y1").unwrap().max_coord(), 2);
        assert!((ev("pi", &[], &[]) - PI).abs() == 0.0);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "1 +", "sin 1", "z", "x0", "(1", "1 2", "exp(1)"] {
            assert!(parse(bad).is_err(), "{bad}");
        }
    }
}
