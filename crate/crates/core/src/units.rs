//! Physical units from a fixed registry.
//!
//! A [`Unit`] is a product of registered symbols raised to integer powers.
//! Every registered symbol is a power-of-ten multiple of a base unit
//! (metre, second, mole, volt), so conversions are exact multiplications
//! or divisions by powers of ten.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Exponents of the base dimensions: length, time, amount, voltage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Dimension([i32; 4]);

impl Dimension {
    fn add_scaled(&mut self, other: Dimension, power: i32) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b * power;
        }
    }
}

struct Entry {
    symbol: &'static str,
    exp10: i32,
    dim: [i32; 4],
}

const fn e(symbol: &'static str, exp10: i32, dim: [i32; 4]) -> Entry {
    Entry { symbol, exp10, dim }
}

const L: [i32; 4] = [1, 0, 0, 0];
const T: [i32; 4] = [0, 1, 0, 0];
const PER_T: [i32; 4] = [0, -1, 0, 0];
const N: [i32; 4] = [0, 0, 1, 0];
const MOLAR: [i32; 4] = [-3, 0, 1, 0];
const VOLT: [i32; 4] = [0, 0, 0, 1];

static REGISTRY: &[Entry] = &[
    e("m", 0, L),
    e("cm", -2, L),
    e("mm", -3, L),
    e("um", -6, L),
    e("nm", -9, L),
    e("s", 0, T),
    e("ms", -3, T),
    e("Hz", 0, PER_T),
    e("mol", 0, N),
    e("mmol", -3, N),
    e("umol", -6, N),
    e("M", 3, MOLAR),
    e("mM", 0, MOLAR),
    e("uM", -3, MOLAR),
    e("nM", -6, MOLAR),
    e("V", 0, VOLT),
    e("mV", -3, VOLT),
    e("uV", -6, VOLT),
];

fn lookup(symbol: &str) -> Option<&'static Entry> {
    REGISTRY.iter().find(|en| en.symbol == symbol)
}

/// A product of registered unit symbols with integer powers.
///
/// Factors are kept sorted by symbol with zero powers removed, so two units
/// compare equal exactly when they are written with the same symbols.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Unit {
    factors: Vec<(String, i32)>,
}

impl Unit {
    pub fn unitless() -> Self {
        Unit::default()
    }

    pub fn parse(expr: &str) -> Result<Self> {
        let normalized: String = expr
            .trim()
            .chars()
            .map(|c| match c {
                'µ' | 'μ' => 'u',
                '·' => '*',
                c => c,
            })
            .filter(|c| !c.is_whitespace())
            .collect();
        if matches!(normalized.as_str(), "" | "unitless" | "dimensionless" | "1") {
            return Ok(Unit::unitless());
        }
        let mut parser = Parser { s: normalized.as_bytes(), pos: 0, src: expr };
        let factors = parser.expr()?;
        if parser.pos != parser.s.len() {
            return Err(Error::BadUnit(expr.to_string()));
        }
        Ok(Unit::from_factors(factors))
    }

    fn from_factors(raw: Vec<(String, i32)>) -> Self {
        let mut factors: Vec<(String, i32)> = Vec::new();
        for (sym, p) in raw {
            match factors.iter_mut().find(|(s, _)| *s == sym) {
                Some(f) => f.1 += p,
                None => factors.push((sym, p)),
            }
        }
        factors.retain(|(_, p)| *p != 0);
        factors.sort_by(|a, b| a.0.cmp(&b.0));
        Unit { factors }
    }

    pub fn is_unitless(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn dimension(&self) -> Dimension {
        let mut d = Dimension::default();
        for (sym, p) in &self.factors {
            // Registry membership is checked at construction.
            let en = lookup(sym).expect("registered symbol");
            d.add_scaled(Dimension(en.dim), *p);
        }
        d
    }

    fn exp10(&self) -> i32 {
        self.factors
            .iter()
            .map(|(sym, p)| lookup(sym).expect("registered symbol").exp10 * p)
            .sum()
    }

    pub fn is_compatible(&self, other: &Unit) -> bool {
        self.dimension() == other.dimension()
    }

    pub fn mul(&self, other: &Unit) -> Unit {
        let mut raw = self.factors.clone();
        raw.extend(other.factors.iter().cloned());
        Unit::from_factors(raw)
    }

    pub fn div(&self, other: &Unit) -> Unit {
        self.mul(&other.powi(-1))
    }

    pub fn powi(&self, n: i32) -> Unit {
        Unit::from_factors(self.factors.iter().map(|(s, p)| (s.clone(), p * n)).collect())
    }

    /// Power of ten that converts a magnitude in `self` into `target`.
    pub fn conversion_exp10(&self, target: &Unit) -> Result<i32> {
        if !self.is_compatible(target) {
            return Err(Error::UnitMismatch(self.to_string(), target.to_string()));
        }
        Ok(self.exp10() - target.exp10())
    }

    /// Converts a magnitude from `self` into `target`.
    pub fn convert(&self, value: f64, target: &Unit) -> Result<f64> {
        Ok(scale_pow10(value, self.conversion_exp10(target)?))
    }
}

/// Multiplies by 10^k using an exactly representable power (|k| ≤ 22), so
/// each conversion rounds once.
pub fn scale_pow10(value: f64, k: i32) -> f64 {
    fn pow10(n: u32) -> f64 {
        let mut p = 1.0f64;
        for _ in 0..n {
            p *= 10.0;
        }
        p
    }
    match k {
        0 => value,
        k if k > 0 => value * pow10(k as u32),
        k => value / pow10((-k) as u32),
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("unitless");
        }
        let pos: Vec<_> = self.factors.iter().filter(|(_, p)| *p > 0).collect();
        let neg: Vec<_> = self.factors.iter().filter(|(_, p)| *p < 0).collect();
        if pos.is_empty() {
            f.write_str("1")?;
        }
        for (i, (s, p)) in pos.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            f.write_str(s)?;
            if *p != 1 {
                write!(f, "^{p}")?;
            }
        }
        for (s, p) in neg {
            write!(f, "/{s}")?;
            if *p != -1 {
                write!(f, "^{}", -p)?;
            }
        }
        Ok(())
    }
}

impl core::str::FromStr for Unit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Unit::parse(s)
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn bad(&self) -> Error {
        Error::BadUnit(self.src.to_string())
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Vec<(String, i32)>> {
        let mut out = self.term()?;
        while let Some(op) = self.peek() {
            let sign = match op {
                b'*' => 1,
                b'/' => -1,
                _ => break,
            };
            self.pos += 1;
            out.extend(self.term()?.into_iter().map(|(s, p)| (s, p * sign)));
        }
        Ok(out)
    }

    fn term(&mut self) -> Result<Vec<(String, i32)>> {
        let mut base = match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.bad());
                }
                self.pos += 1;
                inner
            }
            Some(b'1') => {
                self.pos += 1;
                Vec::new()
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
                    self.pos += 1;
                }
                let sym = core::str::from_utf8(&self.s[start..self.pos]).map_err(|_| self.bad())?;
                if lookup(sym).is_none() {
                    return Err(self.bad());
                }
                alloc::vec![(sym.to_string(), 1)]
            }
            _ => return Err(self.bad()),
        };
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let start = self.pos;
            if self.peek() == Some(b'-') {
                self.pos += 1;
            }
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            let txt = core::str::from_utf8(&self.s[start..self.pos]).map_err(|_| self.bad())?;
            let n: i32 = txt.parse().map_err(|_| self.bad())?;
            for f in &mut base {
                f.1 *= n;
            }
        }
        Ok(base)
    }
}

/// A magnitude with a unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    pub fn new(value: f64, unit: &str) -> Result<Self> {
        Ok(Quantity { value, unit: Unit::parse(unit)? })
    }

    /// Parses `"<number> <unit>"`, e.g. `"22.5 mm"`. A bare number is unitless.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let split = text
            .char_indices()
            .find(|(_, c)| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .map(|(i, _)| i)
            .unwrap_or(text.len());
        let (num, unit) = text.split_at(split);
        let value: f64 = num.trim().parse().map_err(|_| Error::Parse(text.to_string()))?;
        Ok(Quantity { value, unit: Unit::parse(unit)? })
    }

    pub fn to(&self, target: &Unit) -> Result<f64> {
        self.unit.convert(self.value, target)
    }

    pub fn to_str(&self, target: &str) -> Result<f64> {
        self.to(&Unit::parse(target)?)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, self.unit)
    }
}
