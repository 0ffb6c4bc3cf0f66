//! Text grammar for polynomials in configuration files.
//!
//! ```text
//! expr   := term (("+" | "-") term)*
//! term   := unary ("*"? unary)*
//! unary  := ("+" | "-") unary | power
//! power  := atom ("^" integer)?
//! atom   := number | "x" index | "(" expr ")"
//! ```
//!
//! Variables are `x1 .. xn` (1-based). The `*` may be omitted between
//! factors (`2x1x2`), so `0.8*x1 + 10*(1.0404*x1^2 - 0.2)*x2` and
//! `0.8x1 + 10(1.0404x1^2 - 0.2)x2` parse to the same polynomial.

use crate::error::{Error, Result};

use super::Polynomial;

/// Parses `text` as a polynomial in `n` variables. Error columns are 1-based.
pub fn parse_polynomial(text: &str, n: usize) -> Result<Polynomial> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
        n,
    };
    parser.skip_ws();
    if parser.at_end() {
        return Err(parser.error("empty polynomial"));
    }
    let p = parser.expr()?;
    parser.skip_ws();
    if !parser.at_end() {
        return Err(parser.error(&format!("unexpected `{}`", parser.peek_char())));
    }
    Ok(p)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    n: usize,
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_char(&self) -> char {
        self.peek().map(char::from).unwrap_or('\0')
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn error(&self, message: &str) -> Error {
        Error::Parse {
            column: self.pos + 1,
            message: message.to_string(),
        }
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?)?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn starts_factor(&self) -> bool {
        matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.' || c == b'x' || c == b'(')
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.unary()?;
        loop {
            self.skip_ws();
            if self.peek() == Some(b'*') {
                self.pos += 1;
                acc = acc.mul(&self.unary()?)?;
            } else if self.starts_factor() {
                acc = acc.mul(&self.unary()?)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Polynomial> {
        self.skip_ws();
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(self.unary()?.scale(-1.0))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial> {
        let base = self.atom()?;
        self.skip_ws();
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a non-negative integer exponent"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        let exp: u32 = text.parse().map_err(|_| Error::Parse {
            column: start + 1,
            message: format!("exponent `{text}` too large"),
        })?;
        let mut out = Polynomial::constant(self.n, 1.0);
        for _ in 0..exp {
            out = out.mul(&base)?;
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<Polynomial> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.skip_ws();
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'x') => {
                let col = self.pos + 1;
                self.pos += 1;
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
                if start == self.pos {
                    return Err(Error::Parse {
                        column: col,
                        message: "expected a variable index after `x`".into(),
                    });
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
                let idx: usize = text.parse().unwrap_or(usize::MAX);
                if idx == 0 || idx > self.n {
                    return Err(Error::Parse {
                        column: col,
                        message: format!("variable x{text} out of range x1..x{}", self.n),
                    });
                }
                Polynomial::var(self.n, idx - 1)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(_) => Err(self.error(&format!("unexpected `{}`", self.peek_char()))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Polynomial> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
            self.pos += 1;
        }
        // exponent part only if followed by digits, optionally signed
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        let value: f64 = text.parse().map_err(|_| Error::Parse {
            column: start + 1,
            message: format!("invalid number `{text}`"),
        })?;
        Ok(Polynomial::constant(self.n, value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn van_der_pol_both_spellings() {
        let a = parse_polynomial("0.8*x1 + 10*(1.0404*x1^2 - 0.2)*x2", 2).unwrap();
        let b = parse_polynomial("0.8x1 + 10(1.0404x1^2 - 0.2)x2", 2).unwrap();
        assert_eq!(a, b);
        assert!((a.eval(&[1.0, 1.0]).unwrap() - 9.204).abs() < 1e-12);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let p = parse_polynomial("-x1^2", 1).unwrap();
        assert_eq!(p.eval(&[3.0]).unwrap(), -9.0);
        let q = parse_polynomial("2*-x1", 1).unwrap();
        assert_eq!(q.eval(&[3.0]).unwrap(), -6.0);
    }

    #[test]
    fn scientific_notation() {
        let p = parse_polynomial("1.5e-3*x1 + 2E2", 1).unwrap();
        assert!((p.eval(&[1.0]).unwrap() - 200.0015).abs() < 1e-12);
    }

    #[test]
    fn error_columns() {
        match parse_polynomial("x1 + x3", 2) {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 6),
            other => panic!("unexpected {other:?}"),
        }
        match parse_polynomial("x1 + ", 2) {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 6),
            other => panic!("unexpected {other:?}"),
        }
        match parse_polynomial("(x1 + 1", 2) {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 8),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_polynomial("x1 $ 2", 2).is_err());
        assert!(parse_polynomial("", 2).is_err());
        assert!(parse_polynomial("x1^", 2).is_err());
    }

    #[test]
    fn display_round_trips() {
        let p = parse_polynomial("-0.1 + 3x1x2^2 - 1e-7 x2 + 2/1", 2);
        assert!(p.is_err(), "division is not part of the grammar");
        let p = parse_polynomial("-0.1 + 3x1x2^2 - 1e-7 x2", 2).unwrap();
        let back = parse_polynomial(&p.to_string(), 2).unwrap();
        assert_eq!(p, back);
    }
}
