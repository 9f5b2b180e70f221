//! Recursive-descent parser for coefficient expressions.
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := '-' unary | power
//! power    := primary ('^' exponent)?
//! exponent := signed-literal ('^' exponent)?
//!           | '(' signed-literal ('/' integer)? ')' ('^' exponent)?
//! primary  := number | 't' | ('exp' | 'log' | 'sin' | 'cos') '(' expr ')' | '(' expr ')'
//! ```
//!
//! Exponents are rational literals, so `t^(1/2)` is accepted but `t^t` is not.

use std::fmt;

use num_integer::Integer;
use thiserror::Error;

use super::expr::Expr;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    /// Byte offset into the source.
    pub offset: usize,
    pub expected: Vec<&'static str>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parse error at offset {}: expected {}, found {}",
            self.offset,
            self.expected.join(" | "),
            self.found
        )
    }
}

const OPERAND: &[&str] = &["number", "t", "exp", "log", "sin", "cos", "(", "-"];

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < src.len() {
        return Err(p.error(&["+", "-", "*", "/", "^", "end of input"]));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn error(&mut self, expected: &[&'static str]) -> ParseError {
        self.skip_ws();
        let found = match self.rest().chars().next() {
            Some(c) => format!("`{c}`"),
            None => "end of input".to_string(),
        };
        ParseError {
            offset: self.pos,
            expected: expected.to_vec(),
            found,
        }
    }

    fn expect(&mut self, c: char, name: &'static str) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&[name]))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = Expr::add(acc, self.term()?);
            } else if self.eat('-') {
                acc = Expr::sub(acc, self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = Expr::mul(acc, self.unary()?);
            } else if self.eat('/') {
                acc = Expr::div(acc, self.unary()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            return Ok(Expr::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.eat('^') {
            let (p, q) = self.exponent()?;
            return Ok(Expr::pow(base, p, q));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<(i64, i64), ParseError> {
        let start = self.pos;
        let (p, q) = if self.eat('(') {
            let neg = self.eat('-');
            let (mut p, mut q) = self.rational_literal()?;
            if self.eat('/') {
                let (d, dq) = self.rational_literal()?;
                if d == 0 {
                    return Err(ParseError {
                        offset: start,
                        expected: vec!["non-zero denominator"],
                        found: "0".into(),
                    });
                }
                p *= dq;
                q *= d;
            }
            self.expect(')', ")")?;
            (if neg { -p } else { p }, q)
        } else {
            let neg = self.eat('-');
            let (p, q) = self.rational_literal()?;
            (if neg { -p } else { p }, q)
        };
        let g = p.gcd(&q).max(1);
        let (p, q) = (p / g, q / g);
        if self.eat('^') {
            let at = self.pos;
            let (e, eq) = self.exponent()?;
            if eq != 1 || e.abs() > 16 {
                return Err(ParseError {
                    offset: at,
                    expected: vec!["small integer exponent in a chained power"],
                    found: format!("{e}/{eq}"),
                });
            }
            let (mut rp, mut rq) = (
                p.pow(e.unsigned_abs() as u32),
                q.pow(e.unsigned_abs() as u32),
            );
            if e < 0 {
                std::mem::swap(&mut rp, &mut rq);
            }
            if rq < 0 {
                rp = -rp;
                rq = -rq;
            }
            return Ok((rp, rq));
        }
        Ok((p, q))
    }

    /// Unsigned decimal literal as an exact fraction.
    fn rational_literal(&mut self) -> Result<(i64, i64), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let text = self.number_text();
        if text.is_empty() {
            return Err(self.error(&["rational exponent literal"]));
        }
        let bad = |found: &str| ParseError {
            offset: start,
            expected: vec!["rational exponent literal"],
            found: found.to_string(),
        };
        if text.contains(['e', 'E']) {
            return Err(bad(text));
        }
        let (int_part, frac_part) = text.split_once('.').unwrap_or((text, ""));
        let digits = format!("{int_part}{frac_part}");
        let num: i64 = digits.parse().map_err(|_| bad(text))?;
        let den = 10i64
            .checked_pow(frac_part.len() as u32)
            .ok_or_else(|| bad(text))?;
        Ok((num, den))
    }

    /// Consumes a numeric literal (digits, optional fraction, optional
    /// exponent) and returns its text.
    fn number_text(&mut self) -> &'a str {
        let rest = self.rest();
        let bytes = rest.as_bytes();
        let mut i = 0;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'.' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i > 0 && i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            let digits_start = j;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j > digits_start {
                i = j;
            }
        }
        if i == 1 && bytes[0] == b'.' {
            return "";
        }
        self.pos += i;
        &rest[..i]
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                let text = self.number_text();
                text.parse::<f64>()
                    .map(Expr::constant)
                    .map_err(|_| ParseError {
                        offset: start,
                        expected: vec!["number"],
                        found: format!("`{text}`"),
                    })
            }
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')', ")")?;
                Ok(e)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let ident: String = self
                    .rest()
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                    .collect();
                self.pos += ident.len();
                let func: fn(Expr) -> Expr = match ident.as_str() {
                    "t" => return Ok(Expr::t()),
                    "exp" => Expr::exp,
                    "log" => Expr::log,
                    "sin" => Expr::sin,
                    "cos" => Expr::cos,
                    _ => {
                        return Err(ParseError {
                            offset: start,
                            expected: OPERAND.to_vec(),
                            found: format!("`{ident}`"),
                        })
                    }
                };
                self.expect('(', "(")?;
                let arg = self.expr()?;
                self.expect(')', ")")?;
                Ok(func(arg))
            }
            _ => Err(self.error(OPERAND)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::expr::Node;
    use super::*;

    #[test]
    fn quotient_and_product_nodes() {
        assert!(matches!(
            parse_expr("2/(1+t^2)").unwrap().node(),
            Node::Div(..)
        ));
        assert!(matches!(
            parse_expr("exp(-t)*cos(t)").unwrap().node(),
            Node::Mul(..)
        ));
    }

    #[test]
    fn trailing_operator_reports_offset() {
        let err = parse_expr("2 +").unwrap_err();
        assert_eq!(err.offset, 3);
        assert!(err.expected.contains(&"number"));
        assert_eq!(err.found, "end of input");
    }

    #[test]
    fn rational_exponents() {
        let e = parse_expr("t^(1/2)").unwrap();
        assert!((e.eval(4.0) - 2.0).abs() < 1e-15);
        let e = parse_expr("t^-2").unwrap();
        assert!((e.eval(2.0) - 0.25).abs() < 1e-15);
        let e = parse_expr("t^0.5").unwrap();
        assert!((e.eval(9.0) - 3.0).abs() < 1e-15);
        // right associative: 2^(3^2)
        let e = parse_expr("2^3^2").unwrap();
        assert_eq!(e.eval(0.0), 512.0);
        assert!(parse_expr("t^t").is_err());
    }

    #[test]
    fn precedence() {
        let e = parse_expr("-t^2 + 3*t - 1/2").unwrap();
        let x: f64 = 1.5;
        assert!((e.eval(x) - (-x * x + 3.0 * x - 0.5)).abs() < 1e-15);
        let e = parse_expr("1e-3*t").unwrap();
        assert!((e.eval(2.0) - 2e-3).abs() < 1e-18);
    }

    #[test]
    fn unknown_identifier() {
        let err = parse_expr("1 + tan(t)").unwrap_err();
        assert_eq!(err.offset, 4);
    }

    #[test]
    fn unbalanced_parenthesis() {
        let err = parse_expr("(1 + t").unwrap_err();
        assert_eq!(err.offset, 6);
        assert_eq!(err.expected, vec![")"]);
    }
}
