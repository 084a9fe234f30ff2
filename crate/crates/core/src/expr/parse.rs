//! Recursive-descent parser for the expression grammar:
//! identifiers, rational/decimal literals, `+ - * / ^` (power with integer
//! exponent only), parentheses and the function calls exp/log/sin/cos/sqrt.

use super::{Expr, Func};
use crate::error::KwError;
use crate::rat::{rat_int, Rat};
use num_bigint::BigInt;
use num_traits::One;

/// Parses `src`; every identifier that is not a function name must appear in
/// `allowed` or the parse fails with its position.
pub fn parse_expr(src: &str, allowed: &[String]) -> Result<Expr, KwError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
        allowed,
    };
    p.skip_ws();
    let e = p.parse_sum()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    allowed: &'a [String],
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> KwError {
        KwError::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn parse_sum(&mut self) -> Result<Expr, KwError> {
        let mut terms = Vec::new();
        let first_neg = self.eat(b'-');
        let mut t = self.parse_product()?;
        if first_neg {
            t = Expr::neg(t);
        }
        terms.push(t);
        loop {
            if self.eat(b'+') {
                terms.push(self.parse_product()?);
            } else if self.eat(b'-') {
                terms.push(Expr::neg(self.parse_product()?));
            } else {
                break;
            }
        }
        Ok(Expr::add(terms))
    }

    fn parse_product(&mut self) -> Result<Expr, KwError> {
        let mut acc = self.parse_power()?;
        loop {
            if self.eat(b'*') {
                acc = Expr::mul2(acc, self.parse_power()?);
            } else if self.eat(b'/') {
                let rhs = self.parse_power()?;
                if rhs.is_zero_literal() {
                    return Err(self.err("division by the literal zero"));
                }
                acc = Expr::quot(acc, rhs);
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn parse_power(&mut self) -> Result<Expr, KwError> {
        let base = self.parse_atom()?;
        if self.eat(b'^') {
            let exp = self.parse_int_exponent()?;
            if base.is_zero_literal() && exp < 0 {
                return Err(self.err("zero raised to a negative power"));
            }
            return Ok(Expr::pow(base, exp));
        }
        Ok(base)
    }

    /// Exponent: an optionally negated integer literal, possibly in parens.
    fn parse_int_exponent(&mut self) -> Result<i64, KwError> {
        if self.eat(b'(') {
            let v = self.parse_int_exponent()?;
            if !self.eat(b')') {
                return Err(self.err("expected `)` after exponent"));
            }
            return Ok(v);
        }
        let neg = self.eat(b'-');
        let start = self.pos;
        while self.peek().map(|c| c.is_ascii_digit()).unwrap_or(false) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected an integer exponent"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        self.skip_ws();
        let v: i64 = digits
            .parse()
            .map_err(|_| self.err("integer exponent out of range"))?;
        Ok(if neg { -v } else { v })
    }

    fn parse_atom(&mut self) -> Result<Expr, KwError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let inner = self.parse_sum()?;
                if !self.eat(b')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(inner)
            }
            Some(b'-') => {
                self.pos += 1;
                self.skip_ws();
                Ok(Expr::neg(self.parse_atom()?))
            }
            Some(c) if c.is_ascii_digit() => self.parse_number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.parse_identifier(),
            _ => Err(self.err("expected a term")),
        }
    }

    fn parse_number(&mut self) -> Result<Expr, KwError> {
        let start = self.pos;
        while self.peek().map(|c| c.is_ascii_digit()).unwrap_or(false) {
            self.pos += 1;
        }
        let int_part = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let mut value: Rat = rat_int(0) + int_part.parse::<BigInt>().unwrap();
        if self.peek() == Some(b'.') {
            self.pos += 1;
            let fstart = self.pos;
            while self.peek().map(|c| c.is_ascii_digit()).unwrap_or(false) {
                self.pos += 1;
            }
            if self.pos == fstart {
                return Err(self.err("expected digits after decimal point"));
            }
            let frac = std::str::from_utf8(&self.src[fstart..self.pos]).unwrap();
            let mut den = BigInt::one();
            for _ in 0..frac.len() {
                den *= 10;
            }
            value += Rat::new(frac.parse::<BigInt>().unwrap(), den);
        }
        self.skip_ws();
        Ok(Expr::rat(value))
    }

    fn parse_identifier(&mut self) -> Result<Expr, KwError> {
        let start = self.pos;
        while self
            .peek()
            .map(|c| c.is_ascii_alphanumeric() || c == b'_')
            .unwrap_or(false)
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .to_string();
        self.skip_ws();
        if let Some(f) = Func::from_name(&name) {
            if !self.eat(b'(') {
                return Err(self.err(&format!("expected `(` after `{}`", name)));
            }
            let arg = self.parse_sum()?;
            if !self.eat(b')') {
                return Err(self.err(&format!("expected `)` closing `{}`", name)));
            }
            return Ok(Expr::func(f, arg));
        }
        if !self.allowed.iter().any(|a| a == &name) {
            return Err(KwError::UnknownIdentifier { name, pos: start });
        }
        Ok(Expr::var(&name))
    }
}
