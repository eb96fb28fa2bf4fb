//! Polynomial expressions such as `x1^2 + x2^2 - 1` or `-0.5*x2`.
//!
//! Grammar: sums and differences of products; factors are numbers,
//! variables `x1..xN`, or parenthesised expressions, each optionally raised
//! to a non-negative integer power with `^`.

use anyhow::{anyhow, bail, Result};
use hmcf_core::Polynomial;

pub fn parse_polynomial(src: &str, nvars: usize) -> Result<Polynomial> {
    let mut p = Parser {
        s: src.as_bytes(),
        pos: 0,
        nvars,
    };
    let out = p.expr()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        bail!("unexpected '{}' at offset {} in \"{src}\"", p.s[p.pos] as char, p.pos);
    }
    Ok(out)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    nvars: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Polynomial> {
        let mut acc = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                self.term()?.scale(-1.0)
            }
            Some(b'+') => {
                self.pos += 1;
                self.term()?
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial> {
        let mut acc = self.power()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = acc.mul(&self.power()?);
        }
        Ok(acc)
    }

    fn power(&mut self) -> Result<Polynomial> {
        let base = self.factor()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let e = self.digits()?;
        let mut out = Polynomial::constant(self.nvars, 1.0);
        for _ in 0..e {
            out = out.mul(&base);
        }
        Ok(out)
    }

    fn digits(&mut self) -> Result<usize> {
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            bail!("expected an integer at offset {start}");
        }
        Ok(std::str::from_utf8(&self.s[start..self.pos])?.parse()?)
    }

    fn factor(&mut self) -> Result<Polynomial> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    bail!("missing ')' at offset {}", self.pos);
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'x') => {
                self.pos += 1;
                let k = self.digits()?;
                if k == 0 || k > self.nvars {
                    bail!("variable x{k} outside x1..x{}", self.nvars);
                }
                Ok(Polynomial::var(self.nvars, k - 1))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.s.len() {
                    let c = self.s[self.pos];
                    let exp_sign = (c == b'-' || c == b'+') && matches!(self.s[self.pos - 1], b'e' | b'E');
                    if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let text = std::str::from_utf8(&self.s[start..self.pos])?;
                let v: f64 = text.parse().map_err(|_| anyhow!("bad number \"{text}\""))?;
                Ok(Polynomial::constant(self.nvars, v))
            }
            Some(c) => bail!("unexpected '{}' at offset {}", c as char, self.pos),
            None => bail!("unexpected end of expression"),
        }
    }
}
