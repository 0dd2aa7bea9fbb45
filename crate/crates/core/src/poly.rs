//! Real multivariate polynomials and a small expression parser.
//!
//! Grammar: sums and differences of products, `^` with a nonnegative
//! integer exponent, parentheses, decimal literals, named variables, `/`
//! by a constant and `sqrt(...)` of a constant.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::ModelError;
use crate::series::{Dims, FtSeries, MultiIndex};

#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.terms.iter()
    }

    fn add_term(&mut self, e: Vec<u32>, c: f64) {
        let v = self.terms.entry(e.clone()).or_insert(0.0);
        *v += c;
        if *v == 0.0 {
            self.terms.remove(&e);
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (e, &c) in &o.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            out.add_term(e.clone(), a * c);
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::zero(self.nvars);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &o.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(self.nvars, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Value of the polynomial if it is constant.
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self.terms.iter().next().filter(|(e, _)| e.iter().all(|&v| v == 0)).map(|(_, &c)| c),
            _ => None,
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, &c)| c * e.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                out.add_term(f, c * e[i] as f64);
            }
        }
        out
    }

    /// Substitutes `subs[i]` for variable `i`; all substitutes share one
    /// variable count.
    pub fn compose(&self, subs: &[Poly]) -> Self {
        let nv = subs.first().map_or(0, |p| p.nvars);
        let mut out = Self::zero(nv);
        for (e, &c) in &self.terms {
            let mut t = Self::constant(nv, c);
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = t.mul(&subs[i].pow(k));
                }
            }
            out = out.add(&t);
        }
        out
    }

    /// Interprets variables `0..n` as `y` and `n..n+2m` as the interleaved
    /// normal coordinates, giving a `k = 0` series.
    pub fn to_series(&self, dims: Dims) -> Result<FtSeries, ModelError> {
        if self.nvars != dims.n + dims.normal() {
            return Err(ModelError::Invalid(format!(
                "polynomial has {} variables, expected {}",
                self.nvars,
                dims.n + dims.normal()
            )));
        }
        let terms = self.terms.iter().map(|(e, &c)| {
            (
                MultiIndex::new(vec![0; dims.n], e[..dims.n].to_vec(), e[dims.n..].to_vec()),
                Complex64::new(c, 0.0),
            )
        });
        Ok(FtSeries::from_terms(dims, terms, true)?)
    }

    /// Expression text that parses back to the same polynomial.
    pub fn to_expr(&self, names: &[&str]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (idx, (e, &c)) in self.terms.iter().enumerate() {
            if idx > 0 {
                out.push_str(" + ");
            }
            let _ = write!(out, "({c:?})");
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => {
                        let _ = write!(out, "*{}", names[i]);
                    }
                    _ => {
                        let _ = write!(out, "*{}^{}", names[i], k);
                    }
                }
            }
        }
        out
    }
}

/// Parses `src` with the given variable names.
pub fn parse_poly(src: &str, names: &[&str]) -> Result<Poly, ModelError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0, names, src_len: src.len() };
    let out = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ModelError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let save = i;
                i += 1;
                if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ModelError::Expression {
                col: start + 1,
                msg: format!("bad number `{text}`"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(ModelError::Expression { col: i + 1, msg: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    names: &'a [&'a str],
    src_len: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ModelError {
        let col = self.toks.get(self.pos).map_or(self.src_len, |t| t.0) + 1;
        ModelError::Expression { col, msg: msg.into() }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn eat_op(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Poly, ModelError> {
        let mut acc = self.term()?;
        loop {
            if self.eat_op('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat_op('-') {
                acc = acc.add(&self.term()?.scale(-1.0));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Poly, ModelError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat_op('*') {
                acc = acc.mul(&self.unary()?);
            } else if self.eat_op('/') {
                let d = self.unary()?;
                let c = d.as_constant().ok_or_else(|| self.err("division by a non-constant"))?;
                if c == 0.0 {
                    return Err(self.err("division by zero"));
                }
                acc = acc.scale(1.0 / c);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Poly, ModelError> {
        if self.eat_op('-') {
            return Ok(self.unary()?.scale(-1.0));
        }
        if self.eat_op('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Poly, ModelError> {
        let base = self.atom()?;
        if self.eat_op('^') {
            match self.peek().cloned() {
                Some(Tok::Num(v)) if v >= 0.0 && v.fract() == 0.0 && v <= 64.0 => {
                    self.pos += 1;
                    Ok(base.pow(v as u32))
                }
                _ => Err(self.err("exponent must be a nonnegative integer literal")),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Poly, ModelError> {
        let nv = self.names.len();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Poly::constant(nv, v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat_op(')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if name == "sqrt" {
                    if !self.eat_op('(') {
                        return Err(self.err("expected `(` after sqrt"));
                    }
                    let e = self.expr()?;
                    if !self.eat_op(')') {
                        return Err(self.err("expected `)`"));
                    }
                    let c = e.as_constant().ok_or_else(|| self.err("sqrt of a non-constant"))?;
                    if c < 0.0 {
                        return Err(self.err("sqrt of a negative number"));
                    }
                    return Ok(Poly::constant(nv, c.sqrt()));
                }
                match self.names.iter().position(|n| *n == name) {
                    Some(i) => Ok(Poly::var(nv, i)),
                    None => {
                        self.pos -= 1;
                        Err(self.err(&format!("unknown variable `{name}`")))
                    }
                }
            }
            _ => Err(self.err("expected a number, variable or `(`")),
        }
    }
}

/// Names `y1..yn, u1, v1, .., um, vm` used for Hamiltonians.
pub fn phase_names(dims: Dims) -> Vec<String> {
    let mut v: Vec<String> = (1..=dims.n).map(|i| format!("y{i}")).collect();
    for j in 1..=dims.m {
        v.push(format!("u{j}"));
        v.push(format!("v{j}"));
    }
    v
}

/// Names `l1..l{n0}` used for chart maps.
pub fn chart_names(n0: usize) -> Vec<String> {
    (1..=n0).map(|i| format!("l{i}")).collect()
}
